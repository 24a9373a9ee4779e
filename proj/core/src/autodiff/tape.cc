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

#include "metaunlearn/autodiff/tape.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/common/errors.h"

namespace metaunlearn::ad {

namespace {
thread_local bool g_recording = true;
}  // namespace

struct ValueAccess {
  static const std::shared_ptr<TapeState>& tape(const Value& v) {
    return v.tape_;
  }
};

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Everything a node needs to know about one of its inputs, minus the tape
// pointer (storing it would make the tape own itself).
struct Slot {
  std::shared_ptr<const Buffer> data;
  Shape shape;
  std::int64_t id = -1;
};

struct Node {
  std::string_view primitive;
  std::vector<Slot> inputs;
  Slot output;
  BackwardFn backward;
  ReplayFn replay;
};

class TapeState : public std::enable_shared_from_this<TapeState> {
 public:
  explicit TapeState(bool higher_order) : higher_order_(higher_order) {}

  bool higher_order() const { return higher_order_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return *nodes_[i]; }

  Value append(Node node) {
    const auto id = static_cast<std::int64_t>(nodes_.size());
    node.output.id = id;
    Value v;
    v.data_ = node.output.data;
    v.shape_ = node.output.shape;
    v.tape_ = shared_from_this();
    v.node_ = id;
    nodes_.push_back(std::make_unique<Node>(std::move(node)));
    return v;
  }

  Value attach(const Slot& slot) {
    Value v;
    v.data_ = slot.data;
    v.shape_ = slot.shape;
    if (slot.id >= 0) {
      v.tape_ = shared_from_this();
      v.node_ = slot.id;
    }
    return v;
  }

  static Slot slot_of(const Value& v) { return Slot{v.data_, v.shape_, v.node_}; }

  std::vector<Value> backward(const Value& output, std::span<const Value> wrt,
                              bool create_graph);

 private:
  bool higher_order_;
  std::vector<std::unique_ptr<Node>> nodes_;
};

std::vector<Value> TapeState::backward(const Value& output,
                                       std::span<const Value> wrt,
                                       bool create_graph) {
  if (!output.defined() || output.size() != 1) {
    throw InvalidArgument("grad: output must be a scalar, got shape " +
                          shape_string(output.shape()));
  }
  if (create_graph && !higher_order_) {
    throw InvalidArgument(
        "grad: create_graph requires a tape recorded with higher_order");
  }
  std::int64_t lowest = std::numeric_limits<std::int64_t>::max();
  for (const Value& w : wrt) {
    if (!w.defined() || w.tape_state() != this) {
      throw InvalidArgument("grad: every wrt value must be recorded on this tape");
    }
    lowest = std::min(lowest, w.node_id());
  }

  std::vector<Value> result;
  result.reserve(wrt.size());
  if (output.tape_state() != this || wrt.empty() || output.node_id() < lowest) {
    for (const Value& w : wrt) result.push_back(Value::zeros(w.shape()));
    return result;
  }

  std::optional<NoRecordGuard> guard;
  if (!create_graph) guard.emplace();

  const std::int64_t top = output.node_id();
  std::vector<Value> adjoint(static_cast<std::size_t>(top) + 1);
  adjoint[top] = Value::full(output.shape(), 1.0);

  for (std::int64_t i = top; i >= lowest; --i) {
    Value g = std::move(adjoint[i]);
    if (!g.defined()) continue;
    // Keep the node's adjoint for the wrt lookup below.
    adjoint[i] = g;
    const Node& n = *nodes_[i];
    if (!n.backward) continue;  // leaf
    const std::size_t arity = n.inputs.size();
    std::vector<Value> inputs;
    inputs.reserve(arity);
    std::unique_ptr<bool[]> needs(new bool[arity]);
    bool any = false;
    for (std::size_t k = 0; k < arity; ++k) {
      const Slot& s = n.inputs[k];
      inputs.push_back(attach(s));
      needs[k] = s.id >= lowest;
      any = any || needs[k];
    }
    if (!any) continue;
    Value out = attach(n.output);
    BackwardFn fn = n.backward;  // nodes_ may grow while fn runs
    std::vector<Value> grads =
        fn(g, inputs, out, std::span<const bool>(needs.get(), arity));
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (!needs[k] || k >= grads.size() || !grads[k].defined()) continue;
      const std::int64_t id = inputs[k].node_id();
      Value& acc = adjoint[static_cast<std::size_t>(id)];
      acc = acc.defined() ? add(acc, grads[k]) : grads[k];
    }
  }

  for (const Value& w : wrt) {
    const Value& a = adjoint[static_cast<std::size_t>(w.node_id())];
    if (!a.defined()) {
      result.push_back(Value::zeros(w.shape()));
    } else {
      result.push_back(create_graph ? a : a.detach());
    }
  }
  return result;
}

// --- Value -----------------------------------------------------------------

Value::Value(Shape shape, Buffer data)
    : data_(std::make_shared<const Buffer>(std::move(data))),
      shape_(std::move(shape)) {
  if (numel(shape_) != data_->size()) {
    throw InvalidArgument("Value: shape " + shape_string(shape_) +
                          " does not match data length " +
                          std::to_string(data_->size()));
  }
}

Value Value::scalar(double v) { return Value(Shape{}, Buffer{v}); }
Value Value::zeros(Shape shape) { return full(std::move(shape), 0.0); }
Value Value::full(Shape shape, double v) {
  const std::size_t n = numel(shape);
  return Value(std::move(shape), Buffer(n, v));
}
Value Value::vector(Buffer data) {
  const std::size_t n = data.size();
  return Value(Shape{n}, std::move(data));
}
Value Value::matrix(std::size_t rows, std::size_t cols, Buffer data) {
  return Value(Shape{rows, cols}, std::move(data));
}

std::span<const double> Value::data() const {
  if (!data_) return {};
  return std::span<const double>(data_->data(), data_->size());
}

double Value::item() const {
  if (size() != 1) {
    throw InvalidArgument("item: value has shape " + shape_string(shape_));
  }
  return (*data_)[0];
}

Value Value::detach() const {
  Value v;
  v.data_ = data_;
  v.shape_ = shape_;
  return v;
}

// --- Tape ------------------------------------------------------------------

Tape::Tape(bool higher_order)
    : state_(std::make_shared<TapeState>(higher_order)) {}

bool Tape::higher_order() const { return state_->higher_order(); }
std::size_t Tape::size() const { return state_->size(); }

std::vector<std::string> Tape::primitive_names() const {
  std::vector<std::string> names;
  names.reserve(state_->size());
  for (std::size_t i = 0; i < state_->size(); ++i) {
    names.emplace_back(state_->node(i).primitive);
  }
  return names;
}

Value Tape::leaf(Shape shape, Buffer data) {
  Value init(std::move(shape), std::move(data));
  return leaf(init);
}

Value Tape::leaf(const Value& init) {
  if (!init.defined()) throw InvalidArgument("leaf: undefined value");
  for (double x : init.data()) {
    if (!std::isfinite(x)) throw NumericalError("leaf: non-finite entry");
  }
  Node n;
  n.primitive = "leaf";
  n.output = TapeState::slot_of(init.detach());
  return state_->append(std::move(n));
}

std::vector<Value> Tape::grad(const Value& output, std::span<const Value> wrt,
                              bool create_graph) const {
  return state_->backward(output, wrt, create_graph);
}

std::vector<Value> Tape::grad(const Value& output,
                              std::span<const Value> wrt) const {
  return state_->backward(output, wrt, state_->higher_order());
}

Value Tape::grad(const Value& output, const Value& wrt,
                 bool create_graph) const {
  return state_->backward(output, std::span<const Value>(&wrt, 1),
                          create_graph)[0];
}

Value Tape::hvp(const Value& output, const Value& wrt, const Value& v) const {
  if (!state_->higher_order()) {
    throw InvalidArgument(
        "hvp: tape was recorded without higher_order; second derivatives "
        "are unavailable");
  }
  if (v.shape() != wrt.shape()) {
    throw InvalidArgument("hvp: v has shape " + shape_string(v.shape()) +
                          ", wrt has " + shape_string(wrt.shape()));
  }
  Value g = grad(output, wrt, /*create_graph=*/true);
  Value inner = dot(g, v.detach());
  return grad(inner, wrt, /*create_graph=*/false);
}

Value Tape::replay(const Value& output) const {
  if (output.tape_state() != state_.get()) return output.detach();
  NoRecordGuard guard;
  const auto top = static_cast<std::size_t>(output.node_id());
  std::vector<Value> values(top + 1);
  for (std::size_t i = 0; i <= top; ++i) {
    const Node& n = state_->node(i);
    if (!n.replay) {
      values[i] = state_->attach(Slot{n.output.data, n.output.shape, -1});
      continue;
    }
    std::vector<Value> in;
    in.reserve(n.inputs.size());
    for (const Slot& s : n.inputs) {
      in.push_back(s.id >= 0 ? values[static_cast<std::size_t>(s.id)]
                             : state_->attach(Slot{s.data, s.shape, -1}));
    }
    values[i] = n.replay(in);
  }
  return values[top];
}

std::pair<Value, Tape> record(const std::function<Value(Tape&)>& expr,
                              bool higher_order) {
  Tape tape(higher_order);
  Value out = expr(tape);
  return {std::move(out), std::move(tape)};
}

std::vector<Value> grad(const Tape& tape, const Value& output,
                        std::span<const Value> wrt) {
  return tape.grad(output, wrt);
}

Value hvp(const Tape& tape, const Value& output, const Value& wrt,
          const Value& v) {
  return tape.hvp(output, wrt, v);
}

NoRecordGuard::NoRecordGuard() : previous_(g_recording) { g_recording = false; }
NoRecordGuard::~NoRecordGuard() { g_recording = previous_; }
bool recording_enabled() { return g_recording; }

Value make_result(std::string_view primitive, std::vector<Value> inputs,
                  Shape shape, Buffer data, BackwardFn backward,
                  ReplayFn replay) {
  for (double x : data) {
    if (!std::isfinite(x)) {
      throw NumericalError("primitive '" + std::string(primitive) +
                           "' produced a non-finite value");
    }
  }
  Value result(std::move(shape), std::move(data));
  if (!g_recording) return result;

  std::shared_ptr<TapeState> tape;
  for (const Value& in : inputs) {
    if (!in.on_tape()) continue;
    if (tape && in.tape_state() != tape.get()) {
      throw InvalidArgument("primitive '" + std::string(primitive) +
                            "' mixes values from different tapes");
    }
    if (!tape) tape = ValueAccess::tape(in);
  }
  if (!tape) return result;

  Node n;
  n.primitive = primitive;
  n.inputs.reserve(inputs.size());
  for (const Value& in : inputs) n.inputs.push_back(TapeState::slot_of(in));
  n.output = TapeState::slot_of(result);
  n.backward = std::move(backward);
  n.replay = std::move(replay);
  return tape->append(std::move(n));
}

}  // namespace metaunlearn::ad
