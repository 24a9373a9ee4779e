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

// Closed-form attention edits.
//
// uce_solve minimises, for every edited matrix W with original W*,
//
//   sum_f |W e_f - W* e_0|^2 + l1 sum_r |W e_r - W* e_r|^2 + l2 |W - W*|_F^2
//
// where e_0 is the null embedding. Setting the gradient to zero gives
//
//   W (sum_f e_f e_f^T + l1 sum_r e_r e_r^T + l2 I)
//       = sum_f W* e_0 e_f^T + l1 sum_r W* e_r e_r^T + l2 W*.
//
// rece_embedding finds the embedding that the edited matrices map closest to
// what the originals produced for e_f, with a ridge penalty l |e|^2.

#ifndef METAUNLEARN_UNLEARN_CLOSED_FORM_H_
#define METAUNLEARN_UNLEARN_CLOSED_FORM_H_

#include <span>
#include <vector>

namespace metaunlearn::unlearn {

// Dense row-major matrix.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Mat(std::size_t r, std::size_t c, std::vector<double> d);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
  bool operator==(const Mat&) const = default;
};

using Embedding = std::vector<double>;

// Throws InvalidArgument when l2 <= 0 or dimensions disagree, NumericalError
// when the normal equations cannot be solved.
std::vector<Mat> uce_solve(const std::vector<Mat>& w_star,
                           const std::vector<Embedding>& forget,
                           const std::vector<Embedding>& retain,
                           const Embedding& null_embedding, double lambda1,
                           double lambda2);

// e' = (sum_i Wt_i^T Wt_i + l I)^-1 sum_i Wt_i^T W*_i e_f.
Embedding rece_embedding(const std::vector<Mat>& w_edit,
                         const std::vector<Mat>& w_star, const Embedding& e_f,
                         double lambda);

struct ReceResult {
  std::vector<Mat> w;
  // One constructed embedding per iteration and forget concept.
  std::vector<Embedding> embeddings;
};

// UCE, then `iters` rounds of: construct an erasing embedding for every
// forget concept, append it to the forget set, and re-solve UCE.
ReceResult rece_solve(const std::vector<Mat>& w_star,
                      const std::vector<Embedding>& forget,
                      const std::vector<Embedding>& retain,
                      const Embedding& null_embedding, double lambda1,
                      double lambda2, double lambda_rece, int iters);

}  // namespace metaunlearn::unlearn

#endif  // METAUNLEARN_UNLEARN_CLOSED_FORM_H_
