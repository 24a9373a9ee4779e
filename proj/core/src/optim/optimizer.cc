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

#include "metaunlearn/optim/optimizer.h"

#include <cmath>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::optim {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kSgdMomentum: return "sgd_momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "sgd";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "sgd_momentum") return OptimizerKind::kSgdMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  throw InvalidArgument("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double lr, std::size_t size)
    : kind_(kind), lr_(lr) {
  if (!(lr >= 0.0)) throw InvalidArgument("optimizer: lr must be >= 0");
  if (kind != OptimizerKind::kSgd) m_.assign(size, 0.0);
  if (kind == OptimizerKind::kAdam) v_.assign(size, 0.0);
}

void Optimizer::step(std::vector<double>& params, std::span<const double> grad) {
  if (grad.size() != params.size()) {
    throw InvalidArgument("optimizer: gradient size mismatch");
  }
  ++t_;
  const std::size_t n = params.size();
  switch (kind_) {
    case OptimizerKind::kSgd:
      for (std::size_t i = 0; i < n; ++i) params[i] -= lr_ * grad[i];
      break;
    case OptimizerKind::kSgdMomentum:
      for (std::size_t i = 0; i < n; ++i) {
        m_[i] = momentum * m_[i] + grad[i];
        params[i] -= lr_ * m_[i];
      }
      break;
    case OptimizerKind::kAdam: {
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
      for (std::size_t i = 0; i < n; ++i) {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
      }
      break;
    }
  }
}

}  // namespace metaunlearn::optim
