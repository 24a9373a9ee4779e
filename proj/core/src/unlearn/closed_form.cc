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

#include "metaunlearn/unlearn/closed_form.h"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::unlearn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> view(const Mat& m) {
  return Eigen::Map<const RowMatrix>(m.data.data(), static_cast<Eigen::Index>(m.rows),
                                     static_cast<Eigen::Index>(m.cols));
}

Eigen::Map<const Eigen::VectorXd> view(const Embedding& e) {
  return Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
}

void check_dims(const std::vector<Mat>& mats, std::size_t k, const char* op) {
  if (mats.empty()) throw InvalidArgument(std::string(op) + ": no matrices");
  for (const Mat& m : mats) {
    if (m.cols != k || m.data.size() != m.rows * m.cols) {
      throw InvalidArgument(std::string(op) + ": matrix columns must equal the embedding size " +
                            std::to_string(k));
    }
  }
}

void check_embeddings(const std::vector<Embedding>& es, std::size_t k, const char* op) {
  for (const Embedding& e : es) {
    if (e.size() != k) {
      throw InvalidArgument(std::string(op) + ": embedding size mismatch");
    }
  }
}

// Solves X A = B for symmetric positive definite A.
RowMatrix solve_right(const Eigen::MatrixXd& a, const RowMatrix& b, const char* op) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError(std::string(op) + ": normal equations are not positive definite");
  }
  const auto d = ldlt.vectorD();
  if (d.minCoeff() <= 1e-14 * std::max(1.0, d.maxCoeff())) {
    throw NumericalError(std::string(op) + ": normal equations are singular");
  }
  RowMatrix x = ldlt.solve(b.transpose()).transpose();
  if (!x.allFinite()) throw NumericalError(std::string(op) + ": non-finite solution");
  return x;
}

}  // namespace

Mat::Mat(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != r * c) throw InvalidArgument("Mat: data size mismatch");
}

std::vector<Mat> uce_solve(const std::vector<Mat>& w_star,
                           const std::vector<Embedding>& forget,
                           const std::vector<Embedding>& retain,
                           const Embedding& null_embedding, double lambda1,
                           double lambda2) {
  if (!(lambda2 > 0.0)) throw InvalidArgument("uce_solve: lambda2 must be positive");
  if (lambda1 < 0.0) throw InvalidArgument("uce_solve: lambda1 must be >= 0");
  const std::size_t k = null_embedding.size();
  check_dims(w_star, k, "uce_solve");
  check_embeddings(forget, k, "uce_solve");
  check_embeddings(retain, k, "uce_solve");

  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd a = lambda2 * Eigen::MatrixXd::Identity(kk, kk);
  Eigen::MatrixXd forget_cross = Eigen::MatrixXd::Zero(kk, kk);  // sum e_0 e_f^T
  Eigen::MatrixXd retain_outer = Eigen::MatrixXd::Zero(kk, kk);  // sum e_r e_r^T
  for (const Embedding& e : forget) {
    a += view(e) * view(e).transpose();
    forget_cross += view(null_embedding) * view(e).transpose();
  }
  for (const Embedding& e : retain) retain_outer += view(e) * view(e).transpose();
  a += lambda1 * retain_outer;
  const Eigen::MatrixXd rhs_factor =
      forget_cross + lambda1 * retain_outer + lambda2 * Eigen::MatrixXd::Identity(kk, kk);

  std::vector<Mat> out;
  for (const Mat& w : w_star) {
    const RowMatrix b = view(w) * rhs_factor;
    const RowMatrix x = solve_right(a, b, "uce_solve");
    out.emplace_back(w.rows, w.cols, std::vector<double>(x.data(), x.data() + x.size()));
  }
  return out;
}

Embedding rece_embedding(const std::vector<Mat>& w_edit,
                         const std::vector<Mat>& w_star, const Embedding& e_f,
                         double lambda) {
  if (lambda < 0.0) throw InvalidArgument("rece_embedding: lambda must be >= 0");
  const std::size_t k = e_f.size();
  check_dims(w_edit, k, "rece_embedding");
  check_dims(w_star, k, "rece_embedding");
  if (w_edit.size() != w_star.size()) {
    throw InvalidArgument("rece_embedding: edited and original matrix counts differ");
  }
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd a = lambda * Eigen::MatrixXd::Identity(kk, kk);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(kk);
  for (std::size_t i = 0; i < w_edit.size(); ++i) {
    if (w_edit[i].rows != w_star[i].rows) {
      throw InvalidArgument("rece_embedding: matrix shapes differ");
    }
    a += view(w_edit[i]).transpose() * view(w_edit[i]);
    b += view(w_edit[i]).transpose() * (view(w_star[i]) * view(e_f));
  }
  const RowMatrix x = solve_right(a, RowMatrix(b.transpose()), "rece_embedding");
  return Embedding(x.data(), x.data() + x.size());
}

ReceResult rece_solve(const std::vector<Mat>& w_star,
                      const std::vector<Embedding>& forget,
                      const std::vector<Embedding>& retain,
                      const Embedding& null_embedding, double lambda1,
                      double lambda2, double lambda_rece, int iters) {
  if (iters < 1) throw InvalidArgument("rece_solve: iters must be >= 1");
  ReceResult r;
  r.w = uce_solve(w_star, forget, retain, null_embedding, lambda1, lambda2);
  std::vector<Embedding> augmented = forget;
  for (int it = 0; it < iters; ++it) {
    for (const Embedding& e_f : forget) {
      Embedding e = rece_embedding(r.w, w_star, e_f, lambda_rece);
      r.embeddings.push_back(e);
      augmented.push_back(std::move(e));
    }
    r.w = uce_solve(w_star, augmented, retain, null_embedding, lambda1, lambda2);
  }
  return r;
}

}  // namespace metaunlearn::unlearn
