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

#ifndef METAUNLEARN_OPTIM_OPTIMIZER_H_
#define METAUNLEARN_OPTIM_OPTIMIZER_H_

#include <span>
#include <string>
#include <vector>

namespace metaunlearn::optim {

enum class OptimizerKind { kSgd, kSgdMomentum, kAdam };

std::string to_string(OptimizerKind kind);
// Accepts "sgd", "sgd_momentum", "adam".
OptimizerKind parse_optimizer(const std::string& name);

// First-order update rules over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::size_t size);

  void step(std::vector<double>& params, std::span<const double> grad);

  OptimizerKind kind() const { return kind_; }
  double lr() const { return lr_; }
  long steps() const { return t_; }

  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

 private:
  OptimizerKind kind_;
  double lr_;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace metaunlearn::optim

#endif  // METAUNLEARN_OPTIM_OPTIMIZER_H_
