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

#include "metaunlearn/autodiff/ops.h"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::ad {
namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

void require(const Value& v, std::string_view op) {
  if (!v.defined()) {
    throw InvalidArgument(std::string(op) + ": undefined input");
  }
}

std::size_t normalize_axis(int axis, std::size_t rank, std::string_view op) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw InvalidArgument(std::string(op) + ": axis " + std::to_string(axis) +
                          " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// Strides of `in` when viewed inside the broadcast shape `out`; broadcast
// dimensions get stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  const std::size_t offset = out.size() - in.size();
  for (std::size_t i = in.size(); i-- > 0;) {
    if (in[i] != 1) strides[offset + i] = stride;
    stride *= in[i];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <class F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b,
                        F&& f) {
  const std::size_t n = numel(out);
  if (a == out && b == out) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  if (a == out && numel(b) == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, std::size_t{0});
    return;
  }
  if (b == out && numel(a) == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i, std::size_t{0}, i);
    return;
  }
  const auto sa = broadcast_strides(a, out);
  const auto sb = broadcast_strides(b, out);
  const std::size_t rank = out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out[d]) {
        ia += sa[d];
        ib += sb[d];
        break;
      }
      ia -= sa[d] * (out[d] - 1);
      ib -= sb[d] * (out[d] - 1);
      idx[d] = 0;
    }
  }
}

template <class F>
Buffer binary_forward(const Value& a, const Value& b, const Shape& out, F f) {
  Buffer data(numel(out));
  const auto da = a.data();
  const auto db = b.data();
  for_each_broadcast(out, a.shape(), b.shape(),
                     [&](std::size_t i, std::size_t ia, std::size_t ib) {
                       data[i] = f(da[ia], db[ib]);
                     });
  return data;
}

template <class F>
Buffer unary_forward(const Value& x, F f) {
  Buffer data(x.size());
  const auto dx = x.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = f(dx[i]);
  return data;
}

Value reduce_grad(const Value& g, const Shape& shape) {
  return g.shape() == shape ? g : sum_to(g, shape);
}

Value mask_from(const Value& x, double (*pred)(double)) {
  return Value(x.shape(), unary_forward(x, pred));
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw InvalidArgument("cannot broadcast shapes " + shape_string(a) +
                            " and " + shape_string(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

Value add(const Value& a, const Value& b) {
  require(a, "add");
  require(b, "add");
  Shape out = broadcast_shapes(a.shape(), b.shape());
  Buffer data = binary_forward(a, b, out, [](double x, double y) { return x + y; });
  return make_result(
      "add", {a, b}, out, std::move(data),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool> needs) {
        std::vector<Value> r(2);
        if (needs[0]) r[0] = reduce_grad(g, in[0].shape());
        if (needs[1]) r[1] = reduce_grad(g, in[1].shape());
        return r;
      },
      [](std::span<const Value> in) { return add(in[0], in[1]); });
}

Value sub(const Value& a, const Value& b) {
  require(a, "sub");
  require(b, "sub");
  Shape out = broadcast_shapes(a.shape(), b.shape());
  Buffer data = binary_forward(a, b, out, [](double x, double y) { return x - y; });
  return make_result(
      "sub", {a, b}, out, std::move(data),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool> needs) {
        std::vector<Value> r(2);
        if (needs[0]) r[0] = reduce_grad(g, in[0].shape());
        if (needs[1]) r[1] = reduce_grad(neg(g), in[1].shape());
        return r;
      },
      [](std::span<const Value> in) { return sub(in[0], in[1]); });
}

Value mul(const Value& a, const Value& b) {
  require(a, "mul");
  require(b, "mul");
  Shape out = broadcast_shapes(a.shape(), b.shape());
  Buffer data = binary_forward(a, b, out, [](double x, double y) { return x * y; });
  return make_result(
      "mul", {a, b}, out, std::move(data),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool> needs) {
        std::vector<Value> r(2);
        if (needs[0]) r[0] = reduce_grad(mul(g, in[1]), in[0].shape());
        if (needs[1]) r[1] = reduce_grad(mul(g, in[0]), in[1].shape());
        return r;
      },
      [](std::span<const Value> in) { return mul(in[0], in[1]); });
}

Value div(const Value& a, const Value& b) {
  require(a, "div");
  require(b, "div");
  Shape out = broadcast_shapes(a.shape(), b.shape());
  Buffer data = binary_forward(a, b, out, [](double x, double y) { return x / y; });
  return make_result(
      "div", {a, b}, out, std::move(data),
      [](const Value& g, std::span<const Value> in, const Value& y,
         std::span<const bool> needs) {
        std::vector<Value> r(2);
        if (needs[0]) r[0] = reduce_grad(div(g, in[1]), in[0].shape());
        if (needs[1]) {
          r[1] = reduce_grad(neg(div(mul(g, y), in[1])), in[1].shape());
        }
        return r;
      },
      [](std::span<const Value> in) { return div(in[0], in[1]); });
}

Value neg(const Value& x) {
  require(x, "neg");
  return make_result(
      "neg", {x}, x.shape(), unary_forward(x, [](double v) { return -v; }),
      [](const Value& g, std::span<const Value>, const Value&,
         std::span<const bool>) { return std::vector<Value>{neg(g)}; },
      [](std::span<const Value> in) { return neg(in[0]); });
}

Value scale(const Value& x, double c) {
  require(x, "scale");
  return make_result(
      "scale", {x}, x.shape(), unary_forward(x, [c](double v) { return c * v; }),
      [c](const Value& g, std::span<const Value>, const Value&,
          std::span<const bool>) { return std::vector<Value>{scale(g, c)}; },
      [c](std::span<const Value> in) { return scale(in[0], c); });
}

Value add_scalar(const Value& x, double c) {
  require(x, "add_scalar");
  return make_result(
      "add_scalar", {x}, x.shape(),
      unary_forward(x, [c](double v) { return v + c; }),
      [](const Value& g, std::span<const Value>, const Value&,
         std::span<const bool>) { return std::vector<Value>{g}; },
      [c](std::span<const Value> in) { return add_scalar(in[0], c); });
}

Value square(const Value& x) {
  require(x, "square");
  return make_result(
      "square", {x}, x.shape(), unary_forward(x, [](double v) { return v * v; }),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        return std::vector<Value>{scale(mul(g, in[0]), 2.0)};
      },
      [](std::span<const Value> in) { return square(in[0]); });
}

Value sqrt(const Value& x) {
  require(x, "sqrt");
  return make_result(
      "sqrt", {x}, x.shape(),
      unary_forward(x, [](double v) { return std::sqrt(v); }),
      [](const Value& g, std::span<const Value>, const Value& y,
         std::span<const bool>) {
        return std::vector<Value>{scale(div(g, y), 0.5)};
      },
      [](std::span<const Value> in) { return sqrt(in[0]); });
}

Value exp(const Value& x) {
  require(x, "exp");
  return make_result(
      "exp", {x}, x.shape(), unary_forward(x, [](double v) { return std::exp(v); }),
      [](const Value& g, std::span<const Value>, const Value& y,
         std::span<const bool>) { return std::vector<Value>{mul(g, y)}; },
      [](std::span<const Value> in) { return exp(in[0]); });
}

Value sin(const Value& x) {
  require(x, "sin");
  return make_result(
      "sin", {x}, x.shape(), unary_forward(x, [](double v) { return std::sin(v); }),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) { return std::vector<Value>{mul(g, cos(in[0]))}; },
      [](std::span<const Value> in) { return sin(in[0]); });
}

Value cos(const Value& x) {
  require(x, "cos");
  return make_result(
      "cos", {x}, x.shape(), unary_forward(x, [](double v) { return std::cos(v); }),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        return std::vector<Value>{neg(mul(g, sin(in[0])))};
      },
      [](std::span<const Value> in) { return cos(in[0]); });
}

Value sigmoid(const Value& x) {
  require(x, "sigmoid");
  return make_result(
      "sigmoid", {x}, x.shape(),
      unary_forward(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }),
      [](const Value& g, std::span<const Value>, const Value& y,
         std::span<const bool>) {
        // y (1 - y)
        return std::vector<Value>{mul(g, mul(y, add_scalar(neg(y), 1.0)))};
      },
      [](std::span<const Value> in) { return sigmoid(in[0]); });
}

Value relu(const Value& x) {
  require(x, "relu");
  return make_result(
      "relu", {x}, x.shape(),
      unary_forward(x, [](double v) { return v > 0.0 ? v : 0.0; }),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        Value mask = mask_from(in[0], [](double v) { return v > 0.0 ? 1.0 : 0.0; });
        return std::vector<Value>{mul(g, mask)};
      },
      [](std::span<const Value> in) { return relu(in[0]); });
}

Value silu(const Value& x) {
  require(x, "silu");
  return make_result(
      "silu", {x}, x.shape(),
      unary_forward(x, [](double v) { return v / (1.0 + std::exp(-v)); }),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        // d/dx x s(x) = s (1 + x (1 - s))
        Value s = sigmoid(in[0]);
        Value d = mul(s, add_scalar(mul(in[0], add_scalar(neg(s), 1.0)), 1.0));
        return std::vector<Value>{mul(g, d)};
      },
      [](std::span<const Value> in) { return silu(in[0]); });
}

Value sum(const Value& x) {
  require(x, "sum");
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result(
      "sum", {x}, Shape{}, Buffer{total},
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        return std::vector<Value>{broadcast_to(g, in[0].shape())};
      },
      [](std::span<const Value> in) { return sum(in[0]); });
}

Value sum(const Value& x, int axis, bool keepdim) {
  require(x, "sum");
  const std::size_t ax = normalize_axis(axis, x.rank(), "sum");
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[ax];
  Buffer data(outer * inner, 0.0);
  const auto dx = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < len; ++k) {
      const double* row = dx.data() + (o * len + k) * inner;
      double* dst = data.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += row[i];
    }
  }
  Shape kept = s;
  kept[ax] = 1;
  Shape out = kept;
  if (!keepdim) out.erase(out.begin() + static_cast<std::ptrdiff_t>(ax));
  return make_result(
      "sum", {x}, out, std::move(data),
      [kept](const Value& g, std::span<const Value> in, const Value&,
             std::span<const bool>) {
        return std::vector<Value>{broadcast_to(reshape(g, kept), in[0].shape())};
      },
      [axis, keepdim](std::span<const Value> in) {
        return sum(in[0], axis, keepdim);
      });
}

Value mean(const Value& x) {
  require(x, "mean");
  if (x.size() == 0) throw InvalidArgument("mean: empty input");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Value softmax(const Value& x) {
  require(x, "softmax");
  if (x.rank() == 0) throw InvalidArgument("softmax: scalar input");
  const std::size_t len = x.shape().back();
  const std::size_t rows = x.size() / len;
  Buffer data(x.size());
  const auto dx = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = dx.data() + r * len;
    double* out = data.data() + r * len;
    double mx = in[0];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) z += (out[i] = std::exp(in[i] - mx));
    for (std::size_t i = 0; i < len; ++i) out[i] /= z;
  }
  return make_result(
      "softmax", {x}, x.shape(), std::move(data),
      [](const Value& g, std::span<const Value>, const Value& y,
         std::span<const bool>) {
        // y * (g - <g, y>) along the last axis
        Value inner = sum(mul(g, y), -1, /*keepdim=*/true);
        return std::vector<Value>{mul(y, sub(g, inner))};
      },
      [](std::span<const Value> in) { return softmax(in[0]); });
}

Value matmul(const Value& a, const Value& b, bool transpose_a,
             bool transpose_b) {
  require(a, "matmul");
  require(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2) {
    throw InvalidArgument("matmul: rank-2 inputs required, got " +
                          shape_string(a.shape()) + " and " +
                          shape_string(b.shape()));
  }
  const std::size_t m = transpose_a ? a.shape()[1] : a.shape()[0];
  const std::size_t ka = transpose_a ? a.shape()[0] : a.shape()[1];
  const std::size_t kb = transpose_b ? b.shape()[1] : b.shape()[0];
  const std::size_t n = transpose_b ? b.shape()[0] : b.shape()[1];
  if (ka != kb) {
    throw InvalidArgument("matmul: inner dimensions differ (" +
                          shape_string(a.shape()) + " x " +
                          shape_string(b.shape()) + ")");
  }
  ConstMap ma(a.data().data(), static_cast<Eigen::Index>(a.shape()[0]),
              static_cast<Eigen::Index>(a.shape()[1]));
  ConstMap mb(b.data().data(), static_cast<Eigen::Index>(b.shape()[0]),
              static_cast<Eigen::Index>(b.shape()[1]));
  Buffer data(m * n);
  MutMap mc(data.data(), static_cast<Eigen::Index>(m),
            static_cast<Eigen::Index>(n));
  if (!transpose_a && !transpose_b) {
    mc.noalias() = ma * mb;
  } else if (transpose_a && !transpose_b) {
    mc.noalias() = ma.transpose() * mb;
  } else if (!transpose_a && transpose_b) {
    mc.noalias() = ma * mb.transpose();
  } else {
    mc.noalias() = ma.transpose() * mb.transpose();
  }
  return make_result(
      "matmul", {a, b}, Shape{m, n}, std::move(data),
      [transpose_a, transpose_b](const Value& g, std::span<const Value> in,
                                 const Value&, std::span<const bool> needs) {
        const Value& A = in[0];
        const Value& B = in[1];
        std::vector<Value> r(2);
        if (!transpose_a && !transpose_b) {
          if (needs[0]) r[0] = matmul(g, B, false, true);
          if (needs[1]) r[1] = matmul(A, g, true, false);
        } else if (transpose_a && !transpose_b) {
          if (needs[0]) r[0] = matmul(B, g, false, true);
          if (needs[1]) r[1] = matmul(A, g, false, false);
        } else if (!transpose_a && transpose_b) {
          if (needs[0]) r[0] = matmul(g, B, false, false);
          if (needs[1]) r[1] = matmul(g, A, true, false);
        } else {
          if (needs[0]) r[0] = matmul(B, g, true, true);
          if (needs[1]) r[1] = matmul(g, A, true, true);
        }
        return r;
      },
      [transpose_a, transpose_b](std::span<const Value> in) {
        return matmul(in[0], in[1], transpose_a, transpose_b);
      });
}

Value transpose(const Value& x) {
  require(x, "transpose");
  if (x.rank() != 2) throw InvalidArgument("transpose: rank-2 input required");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  Buffer data(x.size());
  const auto dx = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) data[j * r + i] = dx[i * c + j];
  return make_result(
      "transpose", {x}, Shape{c, r}, std::move(data),
      [](const Value& g, std::span<const Value>, const Value&,
         std::span<const bool>) { return std::vector<Value>{transpose(g)}; },
      [](std::span<const Value> in) { return transpose(in[0]); });
}

Value reshape(const Value& x, Shape shape) {
  require(x, "reshape");
  if (numel(shape) != x.size()) {
    throw InvalidArgument("reshape: cannot view " + shape_string(x.shape()) +
                          " as " + shape_string(shape));
  }
  Buffer data(x.data().begin(), x.data().end());
  return make_result(
      "reshape", {x}, shape, std::move(data),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        return std::vector<Value>{reshape(g, in[0].shape())};
      },
      [shape](std::span<const Value> in) { return reshape(in[0], shape); });
}

Value slice(const Value& x, int axis, std::size_t start, std::size_t length) {
  require(x, "slice");
  const std::size_t ax = normalize_axis(axis, x.rank(), "slice");
  const Shape& s = x.shape();
  if (start + length > s[ax]) {
    throw InvalidArgument("slice: [" + std::to_string(start) + ", " +
                          std::to_string(start + length) +
                          ") exceeds dimension " + std::to_string(s[ax]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  Shape out = s;
  out[ax] = length;
  Buffer data(outer * length * inner);
  const auto dx = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = dx.data() + (o * s[ax] + start) * inner;
    std::copy(src, src + length * inner, data.data() + o * length * inner);
  }
  return make_result(
      "slice", {x}, out, std::move(data),
      [ax, start](const Value& g, std::span<const Value> in, const Value&,
                  std::span<const bool>) {
        return std::vector<Value>{pad(g, in[0].shape(), static_cast<int>(ax), start)};
      },
      [ax, start, length](std::span<const Value> in) {
        return slice(in[0], static_cast<int>(ax), start, length);
      });
}

Value pad(const Value& x, const Shape& full_shape, int axis,
          std::size_t start) {
  require(x, "pad");
  const std::size_t ax = normalize_axis(axis, full_shape.size(), "pad");
  if (x.rank() != full_shape.size()) throw InvalidArgument("pad: rank mismatch");
  for (std::size_t i = 0; i < full_shape.size(); ++i) {
    if (i != ax && x.shape()[i] != full_shape[i]) {
      throw InvalidArgument("pad: shape " + shape_string(x.shape()) +
                            " incompatible with " + shape_string(full_shape));
    }
  }
  const std::size_t length = x.shape()[ax];
  if (start + length > full_shape[ax]) throw InvalidArgument("pad: out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= full_shape[i];
  for (std::size_t i = ax + 1; i < full_shape.size(); ++i) inner *= full_shape[i];
  Buffer data(numel(full_shape), 0.0);
  const auto dx = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = dx.data() + o * length * inner;
    std::copy(src, src + length * inner,
              data.data() + (o * full_shape[ax] + start) * inner);
  }
  return make_result(
      "pad", {x}, full_shape, std::move(data),
      [ax, start, length](const Value& g, std::span<const Value>, const Value&,
                          std::span<const bool>) {
        return std::vector<Value>{slice(g, static_cast<int>(ax), start, length)};
      },
      [full_shape, ax, start](std::span<const Value> in) {
        return pad(in[0], full_shape, static_cast<int>(ax), start);
      });
}

Value concat(std::span<const Value> parts, int axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  for (const Value& p : parts) require(p, "concat");
  const Shape& first = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, first.size(), "concat");
  Shape out = first;
  out[ax] = 0;
  for (const Value& p : parts) {
    if (p.rank() != first.size()) throw InvalidArgument("concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != ax && p.shape()[i] != first[i]) {
        throw InvalidArgument("concat: shape mismatch " +
                              shape_string(p.shape()) + " vs " +
                              shape_string(first));
      }
    }
    out[ax] += p.shape()[ax];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= out[i];
  for (std::size_t i = ax + 1; i < out.size(); ++i) inner *= out[i];
  Buffer data(numel(out));
  std::size_t offset = 0;
  for (const Value& p : parts) {
    const std::size_t len = p.shape()[ax];
    const auto dp = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(dp.data() + o * len * inner, dp.data() + (o + 1) * len * inner,
                data.data() + (o * out[ax] + offset) * inner);
    }
    offset += len;
  }
  std::vector<Value> inputs(parts.begin(), parts.end());
  return make_result(
      "concat", inputs, out, std::move(data),
      [ax](const Value& g, std::span<const Value> in, const Value&,
           std::span<const bool> needs) {
        std::vector<Value> r(in.size());
        std::size_t off = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
          const std::size_t len = in[i].shape()[ax];
          if (needs[i]) r[i] = slice(g, static_cast<int>(ax), off, len);
          off += len;
        }
        return r;
      },
      [ax](std::span<const Value> in) { return concat(in, static_cast<int>(ax)); });
}

Value broadcast_to(const Value& x, const Shape& shape) {
  require(x, "broadcast_to");
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw InvalidArgument("broadcast_to: cannot broadcast " +
                          shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Buffer data(numel(shape));
  const auto dx = x.data();
  for_each_broadcast(shape, x.shape(), x.shape().empty() ? Shape{} : x.shape(),
                     [&](std::size_t i, std::size_t ix, std::size_t) {
                       data[i] = dx[ix];
                     });
  return make_result(
      "broadcast_to", {x}, shape, std::move(data),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        return std::vector<Value>{sum_to(g, in[0].shape())};
      },
      [shape](std::span<const Value> in) { return broadcast_to(in[0], shape); });
}

Value sum_to(const Value& x, const Shape& shape) {
  require(x, "sum_to");
  if (broadcast_shapes(shape, x.shape()) != x.shape()) {
    throw InvalidArgument("sum_to: " + shape_string(shape) +
                          " does not broadcast to " + shape_string(x.shape()));
  }
  Buffer data(numel(shape), 0.0);
  const auto dx = x.data();
  for_each_broadcast(x.shape(), shape, shape,
                     [&](std::size_t i, std::size_t it, std::size_t) {
                       data[it] += dx[i];
                     });
  return make_result(
      "sum_to", {x}, shape, std::move(data),
      [](const Value& g, std::span<const Value> in, const Value&,
         std::span<const bool>) {
        return std::vector<Value>{broadcast_to(g, in[0].shape())};
      },
      [shape](std::span<const Value> in) { return sum_to(in[0], shape); });
}

Value stop_gradient(const Value& x) {
  require(x, "stop_gradient");
  return x.detach();
}

Value dot(const Value& a, const Value& b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dot: sizes differ (" + shape_string(a.shape()) +
                          " vs " + shape_string(b.shape()) + ")");
  }
  return sum(mul(a, b.shape() == a.shape() ? b : reshape(b, a.shape())));
}

Value apply(std::string_view primitive, std::span<const Value> args) {
  auto arity = [&](std::size_t n) {
    if (args.size() != n) {
      throw InvalidArgument("primitive '" + std::string(primitive) +
                            "' expects " + std::to_string(n) + " arguments");
    }
  };
  if (primitive == "add") { arity(2); return add(args[0], args[1]); }
  if (primitive == "sub") { arity(2); return sub(args[0], args[1]); }
  if (primitive == "mul") { arity(2); return mul(args[0], args[1]); }
  if (primitive == "div") { arity(2); return div(args[0], args[1]); }
  if (primitive == "matmul") { arity(2); return matmul(args[0], args[1]); }
  if (primitive == "neg") { arity(1); return neg(args[0]); }
  if (primitive == "sum") { arity(1); return sum(args[0]); }
  if (primitive == "mean") { arity(1); return mean(args[0]); }
  if (primitive == "square") { arity(1); return square(args[0]); }
  if (primitive == "sqrt") { arity(1); return sqrt(args[0]); }
  if (primitive == "exp") { arity(1); return exp(args[0]); }
  if (primitive == "sin") { arity(1); return sin(args[0]); }
  if (primitive == "cos") { arity(1); return cos(args[0]); }
  if (primitive == "sigmoid") { arity(1); return sigmoid(args[0]); }
  if (primitive == "relu") { arity(1); return relu(args[0]); }
  if (primitive == "silu") { arity(1); return silu(args[0]); }
  if (primitive == "softmax") { arity(1); return softmax(args[0]); }
  if (primitive == "transpose") { arity(1); return transpose(args[0]); }
  if (primitive == "stop_gradient") { arity(1); return stop_gradient(args[0]); }
  if (primitive == "concat") { return concat(args, 0); }
  throw UnsupportedPrimitive(std::string(primitive));
}

}  // namespace metaunlearn::ad
