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


#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "cli/commands.h"
#include "metaunlearn/autodiff/gradcheck.h"
#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/common/format.h"
#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/meta/meta.h"
#include "metaunlearn/unlearn/closed_form.h"

namespace metaunlearn::cli {
namespace {

using ad::Value;

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

Value random_value(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                   double hi = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Buffer data(n);
  for (double& x : data) x = u(rng);
  return Value(std::move(shape), std::move(data));
}

Check primitive_gradients() {
  std::mt19937_64 rng(101);
  const Value b = random_value({3, 4}, rng);
  const Value w = random_value({4, 2}, rng);
  using Unary = std::function<Value(const Value&)>;
  const std::vector<std::pair<std::string, Unary>> cases = {
      {"add", [&](const Value& x) { return x + b; }},
      {"sub", [&](const Value& x) { return b - x; }},
      {"mul", [&](const Value& x) { return x * b; }},
      {"div", [&](const Value& x) { return b / ad::add_scalar(ad::square(x), 1.0); }},
      {"neg", [](const Value& x) { return -x; }},
      {"scale", [](const Value& x) { return x * 2.5; }},
      {"square", [](const Value& x) { return ad::square(x); }},
      {"sqrt", [](const Value& x) { return ad::sqrt(ad::add_scalar(ad::square(x), 0.5)); }},
      {"exp", [](const Value& x) { return ad::exp(x); }},
      {"sin", [](const Value& x) { return ad::sin(x); }},
      {"cos", [](const Value& x) { return ad::cos(x); }},
      {"sigmoid", [](const Value& x) { return ad::sigmoid(x); }},
      {"silu", [](const Value& x) { return ad::silu(x); }},
      {"sum_axis", [](const Value& x) { return ad::sum(x, 1, true); }},
      {"mean", [](const Value& x) { return ad::mean(ad::square(x)); }},
      {"softmax", [](const Value& x) { return ad::softmax(x); }},
      {"matmul", [&](const Value& x) { return ad::matmul(x, w); }},
      {"transpose", [](const Value& x) { return ad::transpose(x); }},
      {"reshape", [](const Value& x) { return ad::reshape(x, {4, 3}); }},
      {"slice", [](const Value& x) { return ad::slice(x, 1, 1, 2); }},
      {"broadcast", [](const Value& x) {
         return ad::broadcast_to(ad::sum(x, 0, true), {5, 4});
       }},
  };
  const Value theta = random_value({3, 4}, rng);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, fn] : cases) {
    std::mt19937_64 wrng(7);
    Value weights = random_value(fn(theta).shape(), wrng);
    auto f = [&, fn = fn](const Value& x) { return ad::sum(ad::mul(fn(x), weights)); };
    auto report = ad::fd_check(f, theta, 1e-5);
    if (report.max_relative_deviation > worst) {
      worst = report.max_relative_deviation;
      worst_name = name;
    }
  }
  return {"primitive gradients", worst < 1e-5,
          "worst " + worst_name + " rel " + format_double(worst)};
}

struct SmallProblem {
  diffusion::ModelConfig model;
  diffusion::NoiseSchedule schedule;
  diffusion::Batch batch;
  diffusion::NoiseDraws draws;
  Value theta;
};

SmallProblem small_problem(int hidden, int temb, int cond, std::uint64_t seed) {
  SmallProblem p;
  p.model.hidden = hidden;
  p.model.time_embed_dim = temb;
  p.model.cond_dim = cond;
  p.schedule = diffusion::default_schedule();
  concepts::WorldConfig wc;
  wc.cond_dim = cond;
  auto table = concepts::make_world(wc, seed);
  auto bundle = concepts::draw_split(table, {8, 4, 4, 4}, seed + 1);
  p.batch = concepts::make_batch(table, bundle.retain, p.model);
  diffusion::Rng rng(seed + 2);
  p.draws = diffusion::draw_noise(p.batch.size(), p.model.data_dim, p.schedule, rng);
  p.theta = diffusion::DenoiserParams::random(p.model, seed + 3).as_value();
  return p;
}

Check diffusion_loss_gradient() {
  SmallProblem p = small_problem(8, 4, 4, 201);
  auto f = [&](const Value& th) {
    return diffusion::diffusion_loss(p.model, th, p.batch, p.schedule, p.draws);
  };
  auto report = ad::fd_check(f, p.theta, 1e-4);
  return {"diffusion loss gradient", report.passed,
          std::to_string(p.theta.size()) + " params, rel " +
              format_double(report.max_relative_deviation)};
}

Check hessian_vector_product() {
  SmallProblem p = small_problem(4, 4, 2, 301);
  auto f = [&](const Value& th) {
    return diffusion::diffusion_loss(p.model, th, p.batch, p.schedule, p.draws);
  };
  std::mt19937_64 rng(5);
  Value v = random_value(p.theta.shape(), rng);
  ad::Tape tape(true);
  Value th = tape.leaf(p.theta);
  Value hv = tape.hvp(f(th), th, v);
  ad::Buffer numeric = ad::fd_hvp(f, p.theta, v);
  double rel = ad::relative_deviation(hv.data(), numeric);
  return {"hessian-vector product", rel < 1e-3 && p.theta.size() <= 200,
          std::to_string(p.theta.size()) + " params, rel " + format_double(rel)};
}

using unlearn::Embedding;
using unlearn::Mat;

Embedding random_embedding(std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Embedding e(k);
  for (double& x : e) x = n(rng);
  return e;
}

Embedding mat_vec(const Mat& w, const Embedding& e) {
  Embedding out(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    for (std::size_t j = 0; j < w.cols; ++j) out[i] += w(i, j) * e[j];
  }
  return out;
}

// Frobenius norm of the UCE objective gradient at W, relative to |W*|.
double uce_gradient_norm(const Mat& w, const Mat& w_star,
                         const std::vector<Embedding>& forget,
                         const std::vector<Embedding>& retain, const Embedding& e0,
                         double l1, double l2) {
  Mat g(w.rows, w.cols);
  auto accumulate = [&](const Embedding& e, const Embedding& target, double c) {
    Embedding r = mat_vec(w, e);
    for (std::size_t i = 0; i < w.rows; ++i) r[i] -= target[i];
    for (std::size_t i = 0; i < w.rows; ++i) {
      for (std::size_t j = 0; j < w.cols; ++j) g(i, j) += 2.0 * c * r[i] * e[j];
    }
  };
  const Embedding null_out = mat_vec(w_star, e0);
  for (const auto& e : forget) accumulate(e, null_out, 1.0);
  for (const auto& e : retain) accumulate(e, mat_vec(w_star, e), l1);
  double norm = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    g.data[i] += 2.0 * l2 * (w.data[i] - w_star.data[i]);
    norm += g.data[i] * g.data[i];
    scale += w_star.data[i] * w_star.data[i];
  }
  return std::sqrt(norm) / std::max(1.0, std::sqrt(scale));
}

Check uce_stationarity() {
  std::mt19937_64 rng(401);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 8, rows = 6;
    Mat w_star(rows, k);
    for (double& x : w_star.data) x = std::normal_distribution<double>(0, 1)(rng);
    std::vector<Embedding> forget = {random_embedding(k, rng), random_embedding(k, rng)};
    std::vector<Embedding> retain = {random_embedding(k, rng), random_embedding(k, rng),
                                     random_embedding(k, rng)};
    Embedding e0 = random_embedding(k, rng);
    auto w = unlearn::uce_solve({w_star}, forget, retain, e0, 1.0, 0.1);
    worst = std::max(worst,
                     uce_gradient_norm(w[0], w_star, forget, retain, e0, 1.0, 0.1));
  }
  return {"closed-form edit stationarity", worst < 1e-8,
          "max |grad| " + format_double(worst)};
}

Check meta_tau_zero() {
  SmallProblem p = small_problem(8, 4, 4, 501);
  diffusion::Rng rng(9);
  auto retain_draws =
      diffusion::draw_noise(p.batch.size(), p.model.data_dim, p.schedule, rng);
  meta::FrozenBatches frozen{p.batch, p.draws, p.batch, retain_draws};
  meta::MetaProblem problem = meta::make_problem(p.model, p.schedule, frozen);
  auto theta = p.theta.to_vector();
  auto g = meta::meta_grad_exact(theta, problem, 1, 0.0, 1.0);
  auto ft = diffusion::diffusion_loss_grad(p.model, theta, p.batch, p.schedule, p.draws);
  for (double& x : ft.grad) x = -x;
  double rel = ad::relative_deviation(g.grad, ft.grad);
  return {"meta gradient at tau=0", rel < 1e-12, "rel " + format_double(rel)};
}

}  // namespace

int cmd_verify(std::ostream& out) {
  const std::vector<std::function<Check()>> suites = {
      primitive_gradients, diffusion_loss_gradient, hessian_vector_product,
      uce_stationarity, meta_tau_zero};
  bool all = true;
  for (const auto& suite : suites) {
    Check c = suite();
    all = all && c.passed;
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  }
  return all ? kExitOk : kExitVerdict;
}

}  // namespace metaunlearn::cli
