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

#include "metaunlearn/autodiff/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::ad {
namespace {

Buffer tape_gradient(const ScalarFn& f, const Value& theta) {
  Tape tape;
  Value x = tape.leaf(theta);
  Value y = f(x);
  return tape.grad(y, x, false).to_vector();
}

double eval(const ScalarFn& f, const Value& theta) {
  NoRecordGuard guard;
  return f(theta).item();
}

}  // namespace

double relative_deviation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("relative_deviation: size mismatch");
  }
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  if (scale == 0.0) return diff;
  return diff / scale;
}

GradCheckReport fd_check(const ScalarFn& f, const Value& theta, double tol,
                         double step) {
  GradCheckReport report;
  report.analytic = tape_gradient(f, theta);
  report.numeric.resize(theta.size());
  Buffer probe = theta.to_vector();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = eval(f, Value(theta.shape(), probe));
    probe[i] = saved - step;
    const double down = eval(f, Value(theta.shape(), probe));
    probe[i] = saved;
    report.numeric[i] = (up - down) / (2.0 * step);
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double d = std::abs(report.analytic[i] - report.numeric[i]);
    if (d > report.max_abs_deviation) {
      report.max_abs_deviation = d;
      report.worst_index = i;
    }
    scale = std::max({scale, std::abs(report.analytic[i]),
                      std::abs(report.numeric[i])});
  }
  report.max_relative_deviation =
      scale > 0.0 ? report.max_abs_deviation / scale : report.max_abs_deviation;
  report.passed = report.max_relative_deviation < tol;
  return report;
}

Buffer fd_hvp(const ScalarFn& f, const Value& theta, const Value& v,
              double step) {
  if (v.size() != theta.size()) throw InvalidArgument("fd_hvp: size mismatch");
  Buffer plus = theta.to_vector(), minus = theta.to_vector();
  for (std::size_t i = 0; i < plus.size(); ++i) {
    plus[i] += step * v[i];
    minus[i] -= step * v[i];
  }
  Buffer gp = tape_gradient(f, Value(theta.shape(), plus));
  Buffer gm = tape_gradient(f, Value(theta.shape(), minus));
  Buffer out(gp.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (gp[i] - gm[i]) / (2.0 * step);
  }
  return out;
}

}  // namespace metaunlearn::ad
