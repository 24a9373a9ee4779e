// Copyright 2026 The MetaUnlearn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-based reverse-mode differentiation over dense float64 arrays.
//
// A `Value` is an immutable n-d array. Values created with `Tape::leaf` are
// recorded on that tape, and every primitive applied to a recorded Value
// appends a node to the same tape. Values that never touch a tape are plain
// constants and cost no bookkeeping.
//
// A tape constructed with `higher_order = true` records its own backward
// passes, so the gradients it returns are themselves differentiable. This is
// what Hessian-vector products and unrolled inner loops need.
//
// Tapes are single-threaded. Independent tapes may live on different threads.

#ifndef METAUNLEARN_AUTODIFF_TAPE_H_
#define METAUNLEARN_AUTODIFF_TAPE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace metaunlearn::ad {

using Shape = std::vector<std::size_t>;
using Buffer = std::vector<double>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class TapeState;

class Value {
 public:
  // An undefined value. Most operations reject it.
  Value() = default;
  // A constant with the given shape. `data.size()` must equal numel(shape).
  Value(Shape shape, Buffer data);

  static Value scalar(double v);
  static Value zeros(Shape shape);
  static Value full(Shape shape, double v);
  static Value vector(Buffer data);
  static Value matrix(std::size_t rows, std::size_t cols, Buffer data);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  std::span<const double> data() const;
  double operator[](std::size_t i) const { return (*data_)[i]; }
  // Requires exactly one element.
  double item() const;
  Buffer to_vector() const { return data_ ? *data_ : Buffer{}; }

  bool on_tape() const { return tape_ != nullptr; }
  std::int64_t node_id() const { return node_; }
  const TapeState* tape_state() const { return tape_.get(); }

  // Same numbers, no tape.
  Value detach() const;

 private:
  friend class TapeState;
  friend struct ValueAccess;

  std::shared_ptr<const Buffer> data_;
  Shape shape_;
  std::shared_ptr<TapeState> tape_;
  std::int64_t node_ = -1;
};

// Computes input adjoints of one primitive. `needs[i]` is false for inputs
// that are constants; their entries may be left undefined.
using BackwardFn = std::function<std::vector<Value>(
    const Value& grad_out, std::span<const Value> inputs, const Value& output,
    std::span<const bool> needs)>;

// Recomputes a primitive from constant inputs; used by `Tape::replay`.
using ReplayFn = std::function<Value(std::span<const Value> inputs)>;

class Tape {
 public:
  explicit Tape(bool higher_order = false);

  bool higher_order() const;
  // Number of recorded nodes, leaves included.
  std::size_t size() const;
  // Primitive name of every recorded node in topological order.
  std::vector<std::string> primitive_names() const;

  Value leaf(Shape shape, Buffer data);
  Value leaf(const Value& init);

  // Gradient of the scalar `output` with respect to each entry of `wrt`.
  // Entries of `wrt` that do not influence `output` get zeros. Returned
  // values are recorded (differentiable) when `create_graph` is true, which
  // requires a higher-order tape.
  std::vector<Value> grad(const Value& output, std::span<const Value> wrt,
                          bool create_graph) const;
  std::vector<Value> grad(const Value& output,
                          std::span<const Value> wrt) const;
  Value grad(const Value& output, const Value& wrt,
             bool create_graph) const;

  // Hessian of `output` at `wrt` times `v`, as the gradient of
  // <grad(output, wrt), v>. Requires a higher-order tape.
  Value hvp(const Value& output, const Value& wrt, const Value& v) const;

  // Re-evaluates the recorded graph from its leaves and returns the
  // recomputed value of `output` (a constant).
  Value replay(const Value& output) const;

  const std::shared_ptr<TapeState>& state() const { return state_; }

 private:
  std::shared_ptr<TapeState> state_;
};

// Evaluates `expr` against a fresh tape. The closure creates its leaves via
// the tape it is handed.
std::pair<Value, Tape> record(const std::function<Value(Tape&)>& expr,
                              bool higher_order = false);

std::vector<Value> grad(const Tape& tape, const Value& output,
                        std::span<const Value> wrt);
Value hvp(const Tape& tape, const Value& output, const Value& wrt,
          const Value& v);

// Disables recording on the current thread for its lifetime. Primitives
// evaluated inside produce constants.
class NoRecordGuard {
 public:
  NoRecordGuard();
  ~NoRecordGuard();
  NoRecordGuard(const NoRecordGuard&) = delete;
  NoRecordGuard& operator=(const NoRecordGuard&) = delete;

 private:
  bool previous_;
};

bool recording_enabled();

// Builds the result of a primitive: checks that every entry is finite,
// and records a node when recording is enabled and any input is on a tape.
// All taped inputs must share one tape. Exposed so that tests and
// extensions can define their own primitives.
Value make_result(std::string_view primitive, std::vector<Value> inputs,
                  Shape shape, Buffer data, BackwardFn backward,
                  ReplayFn replay);

}  // namespace metaunlearn::ad

#endif  // METAUNLEARN_AUTODIFF_TAPE_H_
