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


// Reference implementations used as test oracles. They share no code with the
// library beyond its public types.

#ifndef METAUNLEARN_TESTS_SUPPORT_ORACLES_H_
#define METAUNLEARN_TESTS_SUPPORT_ORACLES_H_

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "metaunlearn/unlearn/closed_form.h"

namespace metaunlearn::testing {

using Vec = std::vector<double>;

// Central differences of a scalar function of a flat vector.
Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h);

double max_relative_error(const Vec& a, const Vec& b);

// Running product of (1 - beta_t) for a linear schedule in long double.
long double alpha_bar_extended(int steps, double beta_start, double beta_end, int t);

// UCE objective summed over the edited matrices and its gradient.
struct UceInstance {
  std::vector<unlearn::Mat> w_star;
  std::vector<unlearn::Embedding> forget;
  std::vector<unlearn::Embedding> retain;
  unlearn::Embedding null_embedding;
  double lambda1 = 1.0;
  double lambda2 = 0.1;
};

UceInstance random_uce_instance(std::mt19937_64& rng, std::size_t k,
                                std::size_t rows, std::size_t n_forget,
                                std::size_t n_retain);
double uce_objective(const UceInstance& inst, const std::vector<unlearn::Mat>& w);
std::vector<unlearn::Mat> uce_gradient(const UceInstance& inst,
                                       const std::vector<unlearn::Mat>& w);

// Ridge objective of the erasing-embedding problem and its gradient.
struct ReceInstance {
  std::vector<unlearn::Mat> w_edit;
  std::vector<unlearn::Mat> w_star;
  unlearn::Embedding e_f;
  double lambda = 0.1;
};

ReceInstance random_rece_instance(std::mt19937_64& rng, std::size_t k,
                                  std::size_t rows, std::size_t mats);
double rece_objective(const ReceInstance& inst, const unlearn::Embedding& e);
unlearn::Embedding rece_gradient(const ReceInstance& inst, const unlearn::Embedding& e);

// Quadratic bilevel toy: L_ft = 0.5 t^T A t - a^T t, L_r = 0.5 t^T B t - b^T t.
struct QuadraticMeta {
  Eigen::MatrixXd a_mat, b_mat;
  Eigen::VectorXd a_vec, b_vec;

  double l_ft(const Eigen::VectorXd& t) const;
  double l_r(const Eigen::VectorXd& t) const;
  Eigen::VectorXd g_ft(const Eigen::VectorXd& t) const;
  Eigen::VectorXd g_r(const Eigen::VectorXd& t) const;

  // theta after M plain gradient steps on L_ft.
  Eigen::VectorXd inner(const Eigen::VectorXd& t, int steps, double tau) const;
  double meta_loss(const Eigen::VectorXd& t, int steps, double tau, double zeta) const;
  // Hand-derived gradient: J^T chain through (I - tau A)^M.
  Eigen::VectorXd meta_grad(const Eigen::VectorXd& t, int steps, double tau,
                            double zeta) const;
  double surrogate(const Eigen::VectorXd& t, int steps, double tau, double zeta) const;
  Eigen::VectorXd surrogate_grad(const Eigen::VectorXd& t, int steps, double tau,
                                 double zeta) const;
};

QuadraticMeta random_quadratic(std::mt19937_64& rng, int dim);

}  // namespace metaunlearn::testing

#endif  // METAUNLEARN_TESTS_SUPPORT_ORACLES_H_
