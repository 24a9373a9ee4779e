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

// Differentiable primitives. Every backward rule is written in terms of
// these same primitives, so any composition can be differentiated twice.
//
// Binary elementwise operations broadcast with NumPy rules (shapes are
// aligned on their trailing dimensions).

#ifndef METAUNLEARN_AUTODIFF_OPS_H_
#define METAUNLEARN_AUTODIFF_OPS_H_

#include <span>
#include <string_view>
#include <vector>

#include "metaunlearn/autodiff/tape.h"

namespace metaunlearn::ad {

Shape broadcast_shapes(const Shape& a, const Shape& b);

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);
Value neg(const Value& x);
Value scale(const Value& x, double c);
Value add_scalar(const Value& x, double c);

Value square(const Value& x);
Value sqrt(const Value& x);
Value exp(const Value& x);
Value sin(const Value& x);
Value cos(const Value& x);
Value sigmoid(const Value& x);
Value relu(const Value& x);
Value silu(const Value& x);

// Sum of all entries, as a scalar of shape {}.
Value sum(const Value& x);
Value sum(const Value& x, int axis, bool keepdim = false);
Value mean(const Value& x);
// Softmax over the last axis.
Value softmax(const Value& x);

// C = op(a) * op(b) for rank-2 inputs, op = transpose when the flag is set.
Value matmul(const Value& a, const Value& b, bool transpose_a = false,
             bool transpose_b = false);
Value transpose(const Value& x);
Value reshape(const Value& x, Shape shape);
Value slice(const Value& x, int axis, std::size_t start, std::size_t length);
Value concat(std::span<const Value> parts, int axis);
// Inverse of slice: places `x` at [start, start + x.shape[axis]) along
// `axis` inside zeros of `full_shape`.
Value pad(const Value& x, const Shape& full_shape, int axis,
          std::size_t start);
Value broadcast_to(const Value& x, const Shape& shape);
// Sums broadcast dimensions away so that the result has `shape`.
Value sum_to(const Value& x, const Shape& shape);

// Identity in the forward pass, zero in the backward pass.
Value stop_gradient(const Value& x);

// Dot product of two equally sized values (sum of elementwise products).
Value dot(const Value& a, const Value& b);

// Dispatches by primitive name; throws UnsupportedPrimitive for names the
// engine does not implement. Structural primitives that need attributes
// (slice, reshape, ...) are not reachable through this entry point.
Value apply(std::string_view primitive, std::span<const Value> args);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }
inline Value operator/(const Value& a, const Value& b) { return div(a, b); }
inline Value operator-(const Value& x) { return neg(x); }
inline Value operator*(const Value& x, double c) { return scale(x, c); }
inline Value operator*(double c, const Value& x) { return scale(x, c); }
inline Value operator+(const Value& x, double c) { return add_scalar(x, c); }
inline Value operator-(const Value& x, double c) { return add_scalar(x, -c); }

}  // namespace metaunlearn::ad

#endif  // METAUNLEARN_AUTODIFF_OPS_H_
