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

#ifndef METAUNLEARN_AUTODIFF_GRADCHECK_H_
#define METAUNLEARN_AUTODIFF_GRADCHECK_H_

#include <functional>
#include <span>

#include "metaunlearn/autodiff/tape.h"

namespace metaunlearn::ad {

using ScalarFn = std::function<Value(const Value&)>;

struct GradCheckReport {
  // max_i |analytic_i - numeric_i| / max(|analytic|_inf, |numeric|_inf).
  double max_relative_deviation = 0.0;
  double max_abs_deviation = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
  Buffer analytic;
  Buffer numeric;
};

// Compares the tape gradient of `f` at `theta` with central differences of
// step `step`. `f` must return a scalar and must not draw randomness.
GradCheckReport fd_check(const ScalarFn& f, const Value& theta, double tol,
                         double step = 1e-5);

// Central differences of a vector-valued map's gradient: column-free
// Hessian-vector check, (grad(theta + h v) - grad(theta - h v)) / 2h.
Buffer fd_hvp(const ScalarFn& f, const Value& theta, const Value& v,
              double step = 1e-4);

// Relative deviation between two equally sized buffers, normalised by the
// larger infinity norm.
double relative_deviation(std::span<const double> a, std::span<const double> b);

}  // namespace metaunlearn::ad

#endif  // METAUNLEARN_AUTODIFF_GRADCHECK_H_
