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


// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.h"
#include "cli/experiment.h"
#include "metaunlearn/attack/attack.h"
#include "metaunlearn/autodiff/gradcheck.h"
#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/common/errors.h"
#include "metaunlearn/common/format.h"
#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/checkpoint.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/eval/metrics.h"
#include "metaunlearn/meta/meta.h"
#include "metaunlearn/unlearn/closed_form.h"
#include "metaunlearn/unlearn/unlearn.h"
#include "support/oracles.h"

namespace metaunlearn {
namespace {

namespace fs = std::filesystem;
using ad::Value;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kPrimitiveTol = 1e-5;
constexpr double kLossGradTol = 1e-4;
constexpr double kHvpTol = 1e-3;
constexpr std::size_t kHvpMaxParams = 200;
constexpr double kStationaryTol = 1e-8;
constexpr int kClosedFormInstances = 50;
constexpr int kProbes = 10000;
constexpr double kSlopeLo = 1.7;
constexpr double kSlopeHi = 2.3;
constexpr double kMultiStepBand = 4.0;
constexpr int kTermDescentSteps = 50;
constexpr int kAlignmentSteps = 100;
constexpr int kSeeds = 3;
constexpr int kMinStepsNotWorse = 3;
constexpr double kForgetLossThreshold = 0.55;
constexpr double kBenignMmdFactor = 1.5;
constexpr double kBenignScoreBand = 10.0;
constexpr int kBenignSteps = 300;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(double v) { return format_double(v); }

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared experiment state: one pretrained model per seed.

struct SeedWorld {
  cli::ExperimentConfig config;
  concepts::ConceptTable table;
  concepts::DatasetBundle bundle;
  diffusion::NoiseSchedule schedule;
  diffusion::DenoiserParams theta_star{diffusion::ModelConfig{}};
};

cli::ExperimentConfig seed_config(int seed) {
  cli::ExperimentConfig c;
  c.seed = static_cast<std::uint64_t>(seed);
  c.meta.seed = 17 + static_cast<std::uint64_t>(seed);
  return c;
}

const SeedWorld& world(int seed) {
  static std::map<int, std::unique_ptr<SeedWorld>> cache;
  auto& slot = cache[seed];
  if (!slot) {
    slot = std::make_unique<SeedWorld>();
    SeedWorld& w = *slot;
    w.config = seed_config(seed);
    const cli::ExperimentConfig& c = w.config;
    w.table = concepts::make_world(c.world, cli::stage_seed(c, cli::Stage::kWorld));
    w.bundle = concepts::draw_split(w.table, c.split, cli::stage_seed(c, cli::Stage::kSplit));
    w.schedule = diffusion::make_schedule(c.schedule.steps, c.schedule.beta_start,
                                          c.schedule.beta_end);
    w.theta_star =
        diffusion::DenoiserParams::random(c.model, cli::stage_seed(c, cli::Stage::kInit));
    auto train = concepts::concat_samples(w.bundle.forget, w.bundle.retain);
    auto batch = concepts::make_batch(w.table, train, c.model);
    diffusion::Rng rng(cli::stage_seed(c, cli::Stage::kPretrain));
    diffusion::train_diffusion(w.theta_star, batch, w.schedule, c.pretrain, rng);
  }
  return *slot;
}

// Tuned presets for the two meta-unlearning branches.
unlearn::UnlearnConfig esd_config() {
  unlearn::UnlearnConfig u;
  u.method = unlearn::Method::kEsd;
  u.eta = 1.0;
  u.mask = "esd_u";
  return u;
}

meta::MetaConfig meta_esd_config(const SeedWorld& w) {
  meta::MetaConfig m = w.config.meta;
  m.outer_steps = esd_config().steps;
  m.omega = esd_config().lr;
  m.gamma1 = 1.0;
  m.gamma2 = 0.5;
  m.zeta = 1.0;
  m.tau = 1e-2;
  return m;
}

unlearn::UnlearnConfig uce_config() {
  unlearn::UnlearnConfig u;
  u.method = unlearn::Method::kUce;
  return u;
}

meta::MetaConfig meta_uce_config(const SeedWorld& w) {
  meta::MetaConfig m = w.config.meta;
  m.two_stage = true;
  m.outer_steps = 1000;
  m.omega = 1e-3;
  m.gamma2 = 0.1;
  m.zeta = 3.0;
  m.tau = 1e-2;
  return m;
}

struct MethodModels {
  diffusion::DenoiserParams unlearned{diffusion::ModelConfig{}};
  diffusion::DenoiserParams meta{diffusion::ModelConfig{}};
  std::vector<meta::MetaStepRecord> records;
};

MethodModels train_pair(const SeedWorld& w, bool closed_form) {
  MethodModels out;
  const unlearn::UnlearnConfig u = closed_form ? uce_config() : esd_config();
  const meta::MetaConfig m = closed_form ? meta_uce_config(w) : meta_esd_config(w);
  diffusion::Rng r1(cli::stage_seed(w.config, cli::Stage::kUnlearn));
  out.unlearned = unlearn::run_unlearn(w.theta_star, u, w.bundle, w.table, w.schedule, r1)
                      .params;
  diffusion::Rng r2(cli::stage_seed(w.config, cli::Stage::kUnlearn));
  const diffusion::DenoiserParams& init = closed_form ? out.unlearned : w.theta_star;
  auto result = meta::meta_unlearn(init, m, u, w.theta_star, w.bundle, w.table, w.schedule, r2);
  out.meta = std::move(result.params);
  out.records = std::move(result.records);
  return out;
}

const MethodModels& models(int seed, bool closed_form) {
  static std::map<std::pair<int, bool>, std::unique_ptr<MethodModels>> cache;
  auto& slot = cache[{seed, closed_form}];
  if (!slot) slot = std::make_unique<MethodModels>(train_pair(world(seed), closed_form));
  return *slot;
}

attack::AttackConfig attack_config(bool dense) {
  attack::AttackConfig a;
  a.dataset = attack::AttackData::kFtSingle;
  if (dense) {
    a.checkpoints.clear();
    for (int s = 0; s <= 300; s += 10) a.checkpoints.push_back(s);
  } else {
    a.checkpoints = {0, 50, 100, 200, 300};
  }
  return a;
}

struct CurvePair {
  attack::RelearnCurve unlearned;
  attack::RelearnCurve meta;
};

const CurvePair& curves(int seed, bool closed_form) {
  static std::map<std::pair<int, bool>, std::unique_ptr<CurvePair>> cache;
  auto& slot = cache[{seed, closed_form}];
  if (!slot) {
    const SeedWorld& w = world(seed);
    const MethodModels& mm = models(seed, closed_form);
    // ESD curves are dense so the self-destruct criterion can reuse them.
    const attack::AttackConfig a = attack_config(!closed_form);
    slot = std::make_unique<CurvePair>();
    slot->unlearned =
        attack::run_attack(mm.unlearned, a, w.bundle, w.table, w.schedule, false).curve;
    slot->meta = attack::run_attack(mm.meta, a, w.bundle, w.table, w.schedule, false).curve;
  }
  return *slot;
}

double curve_value_at(const attack::RelearnCurve& c, int step,
                      double attack::CurvePoint::*field) {
  for (const auto& p : c.points) {
    if (p.step == step) return p.*field;
  }
  throw InvalidArgument("curve has no step " + std::to_string(step));
}

// ---------------------------------------------------------------------------
// Criterion 1.

Value random_value(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                   double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Buffer data(ad::numel(shape));
  for (double& x : data) x = u(rng);
  return Value(std::move(shape), std::move(data));
}

Outcome autodiff_correctness() {
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
      {"scale", [](const Value& x) { return ad::scale(x, 2.5); }},
      {"add_scalar", [](const Value& x) { return ad::add_scalar(x, -0.3); }},
      {"square", [](const Value& x) { return ad::square(x); }},
      {"sqrt", [](const Value& x) { return ad::sqrt(ad::add_scalar(ad::square(x), 0.5)); }},
      {"exp", [](const Value& x) { return ad::exp(x); }},
      {"sin", [](const Value& x) { return ad::sin(x); }},
      {"cos", [](const Value& x) { return ad::cos(x); }},
      {"sigmoid", [](const Value& x) { return ad::sigmoid(x); }},
      {"relu", [](const Value& x) { return ad::relu(x); }},
      {"silu", [](const Value& x) { return ad::silu(x); }},
      {"sum", [](const Value& x) { return ad::sum(ad::square(x)); }},
      {"sum_axis", [](const Value& x) { return ad::sum(x, 1, true); }},
      {"mean", [](const Value& x) { return ad::mean(ad::square(x)); }},
      {"softmax", [](const Value& x) { return ad::softmax(x); }},
      {"matmul", [&](const Value& x) { return ad::matmul(x, w); }},
      {"matmul_t", [&](const Value& x) { return ad::matmul(x, b, true, false); }},
      {"transpose", [](const Value& x) { return ad::transpose(x); }},
      {"reshape", [](const Value& x) { return ad::reshape(x, {4, 3}); }},
      {"slice", [](const Value& x) { return ad::slice(x, 1, 1, 2); }},
      {"concat", [&](const Value& x) {
         std::vector<Value> parts = {x, x * b};
         return ad::concat(parts, 0);
       }},
      {"pad", [](const Value& x) { return ad::pad(x, {3, 7}, 1, 2); }},
      {"broadcast_to", [](const Value& x) {
         return ad::broadcast_to(ad::sum(x, 0, true), {5, 4});
       }},
      {"sum_to", [](const Value& x) { return ad::sum_to(x, {1, 4}); }},
      {"dot", [&](const Value& x) { return ad::dot(x, b); }},
  };
  // Inputs kept away from the relu kink.
  Value theta = random_value({3, 4}, rng, 0.1, 1.0);
  {
    ad::Buffer d = theta.to_vector();
    for (std::size_t i = 0; i < d.size(); i += 2) d[i] = -d[i];
    theta = Value(theta.shape(), d);
  }
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, fn] : cases) {
    std::mt19937_64 wrng(7);
    const Value weights = random_value(fn(theta).shape(), wrng);
    auto f = [&, fn = fn](const Value& x) { return ad::sum(ad::mul(fn(x), weights)); };
    const auto report = ad::fd_check(f, theta, kPrimitiveTol);
    if (report.max_relative_deviation >= worst) {
      worst = report.max_relative_deviation;
      worst_name = name;
    }
  }
  const bool prim_ok = worst < kPrimitiveTol;

  // Full denoising loss gradient on the default architecture.
  diffusion::ModelConfig mc;
  auto table = concepts::default_world(1);
  auto bundle = concepts::draw_split(table, {16, 8, 8, 8}, 2);
  auto batch = concepts::make_batch(table, bundle.forget, mc);
  auto schedule = diffusion::default_schedule();
  diffusion::Rng drng(3);
  auto draws = diffusion::draw_noise(batch.size(), mc.data_dim, schedule, drng);
  const Value theta_full = diffusion::DenoiserParams::random(mc, 4).as_value();
  const auto loss_report = ad::fd_check(
      [&](const Value& th) { return diffusion::diffusion_loss(mc, th, batch, schedule, draws); },
      theta_full, kLossGradTol);

  // Hessian-vector products on small nets.
  double hvp_worst = 0.0;
  std::size_t hvp_params = 0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    diffusion::ModelConfig small{2, 4, 4, 4, 1, diffusion::Activation::kSilu};
    concepts::WorldConfig wc;
    wc.cond_dim = small.cond_dim;
    auto st = concepts::make_world(wc, seed);
    auto sb = concepts::draw_split(st, {8, 4, 4, 4}, seed + 1);
    auto sbatch = concepts::make_batch(st, sb.retain, small);
    diffusion::Rng r(seed + 2);
    auto sd = diffusion::draw_noise(sbatch.size(), small.data_dim, schedule, r);
    const Value th0 = diffusion::DenoiserParams::random(small, seed + 3).as_value();
    hvp_params = std::max(hvp_params, th0.size());
    auto f = [&](const Value& th) {
      return diffusion::diffusion_loss(small, th, sbatch, schedule, sd);
    };
    std::mt19937_64 vr(seed);
    const Value v = random_value(th0.shape(), vr);
    ad::Tape tape(true);
    const Value th = tape.leaf(th0);
    const Value hv = tape.hvp(f(th), th, v);
    hvp_worst = std::max(hvp_worst, ad::relative_deviation(hv.data(), ad::fd_hvp(f, th0, v)));
  }
  const bool hvp_ok = hvp_worst < kHvpTol && hvp_params <= kHvpMaxParams;

  return {prim_ok && loss_report.passed && hvp_ok,
          "primitives worst " + worst_name + " " + fixed(worst) + " (<" + fmt(kPrimitiveTol) +
              "); L_DM " + std::to_string(theta_full.size()) + " params " +
              fixed(loss_report.max_relative_deviation) + " (<" + fmt(kLossGradTol) +
              "); HVP " + std::to_string(hvp_params) + " params " + fixed(hvp_worst) +
              " (<" + fmt(kHvpTol) + ")"};
}

// ---------------------------------------------------------------------------
// Criterion 2.

double frob(const std::vector<unlearn::Mat>& ms) {
  double s = 0.0;
  for (const auto& m : ms)
    for (double v : m.data) s += v * v;
  return std::sqrt(s);
}

double log_uniform_scale(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-4.0, -1.0);
  return std::pow(10.0, u(rng));
}

Outcome closed_form_optimality() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  double uce_grad = 0.0, rece_grad = 0.0;
  long uce_violations = 0, rece_violations = 0;
  for (int trial = 0; trial < kClosedFormInstances; ++trial) {
    auto inst = testing::random_uce_instance(rng, 8, 32, 1 + trial % 2, 3);
    auto w = unlearn::uce_solve(inst.w_star, inst.forget, inst.retain, inst.null_embedding,
                                inst.lambda1, inst.lambda2);
    uce_grad = std::max(uce_grad, frob(testing::uce_gradient(inst, w)));
    const double best = testing::uce_objective(inst, w);
    for (int p = 0; p < kProbes; ++p) {
      const double s = log_uniform_scale(rng);
      auto probe = w;
      for (auto& m : probe)
        for (double& v : m.data) v += s * g(rng);
      if (testing::uce_objective(inst, probe) < best) ++uce_violations;
    }
  }
  for (int trial = 0; trial < kClosedFormInstances; ++trial) {
    auto inst = testing::random_rece_instance(rng, 8, 32, 2);
    auto e = unlearn::rece_embedding(inst.w_edit, inst.w_star, inst.e_f, inst.lambda);
    double n = 0.0;
    for (double v : testing::rece_gradient(inst, e)) n += v * v;
    rece_grad = std::max(rece_grad, std::sqrt(n));
    const double best = testing::rece_objective(inst, e);
    for (int p = 0; p < kProbes; ++p) {
      const double s = log_uniform_scale(rng);
      auto probe = e;
      for (double& v : probe) v += s * g(rng);
      if (testing::rece_objective(inst, probe) < best) ++rece_violations;
    }
  }
  const bool ok = uce_grad < kStationaryTol && rece_grad < kStationaryTol &&
                  uce_violations == 0 && rece_violations == 0;
  return {ok, "UCE max |grad| " + fixed(uce_grad) + ", RECE max |grad| " + fixed(rece_grad) +
                  " (<" + fmt(kStationaryTol) + "); probe violations UCE " +
                  std::to_string(uce_violations) + ", RECE " +
                  std::to_string(rece_violations) + " of " +
                  std::to_string(kClosedFormInstances * kProbes) + " each"};
}

// ---------------------------------------------------------------------------
// Criteria 3 and 4.

struct FrozenProblem {
  meta::FrozenBatches batches;
  std::vector<double> theta;
};

FrozenProblem frozen_problem() {
  const SeedWorld& w = world(1);
  const auto& mc = w.theta_star.config();
  diffusion::Rng rng(31);
  FrozenProblem p;
  p.batches = meta::draw_frozen(concepts::make_batch(w.table, w.bundle.forget, mc),
                                concepts::make_batch(w.table, w.bundle.retain, mc),
                                w.config.meta.ft_batch, w.config.meta.retain_batch, mc,
                                w.schedule, rng);
  p.theta = w.theta_star.flat();
  return p;
}

const std::vector<double> kTaus = {1e-2, 1e-3, 1e-4};

struct LadderPoint {
  double tau;
  double value_gap;
  double grad_rel;
};

std::vector<LadderPoint> ladder(const FrozenProblem& fp, const meta::MetaProblem& problem,
                                int steps, double zeta) {
  std::vector<LadderPoint> out;
  for (double tau : kTaus) {
    const double exact = meta::meta_loss_value(fp.theta, problem, steps, tau, zeta);
    const auto fo = meta::meta_grad_first_order(fp.theta, problem, steps, tau, zeta);
    const auto ex = meta::meta_grad_exact(fp.theta, problem, steps, tau, zeta);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ex.grad.size(); ++i) {
      num += (ex.grad[i] - fo.grad[i]) * (ex.grad[i] - fo.grad[i]);
      den += ex.grad[i] * ex.grad[i];
    }
    out.push_back({tau, std::abs(exact - fo.value), std::sqrt(num / den)});
  }
  return out;
}

double loglog_slope(const std::vector<LadderPoint>& pts) {
  std::vector<double> xs, ys;
  for (const auto& p : pts) {
    xs.push_back(std::log(p.tau));
    ys.push_back(std::log(p.value_gap));
  }
  return eval::ols_fit(xs, ys).slope;
}

Outcome approximation_order() {
  const FrozenProblem fp = frozen_problem();
  const auto& mc = world(1).theta_star.config();
  const meta::MetaProblem problem = meta::make_problem(mc, world(1).schedule, fp.batches);
  const auto pts = ladder(fp, problem, 1, 1.0);
  const double slope = loglog_slope(pts);
  bool monotone = true;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].grad_rel < pts[i - 1].grad_rel)) monotone = false;
  }
  std::string detail = "slope " + fixed(slope, 4) + " in [" + fixed(kSlopeLo) + ", " +
                       fixed(kSlopeHi) + "]; gaps";
  for (const auto& p : pts) detail += " " + fixed(p.value_gap);
  detail += "; grad rel diff";
  for (const auto& p : pts) detail += " " + fixed(p.grad_rel);
  return {slope >= kSlopeLo && slope <= kSlopeHi && monotone, detail};
}

Outcome multi_step_equivalence() {
  const FrozenProblem fp = frozen_problem();
  const auto& mc = world(1).theta_star.config();
  const meta::MetaProblem problem = meta::make_problem(mc, world(1).schedule, fp.batches);
  const auto one = ladder(fp, problem, 1, 1.0);
  const auto three = ladder(fp, problem, 3, 1.0);
  bool ok = true;
  std::string detail;
  for (const auto& [m, pts] : {std::pair<int, const std::vector<LadderPoint>&>{1, one},
                               std::pair<int, const std::vector<LadderPoint>&>{3, three}}) {
    const double slope = loglog_slope(pts);
    ok = ok && slope >= kSlopeLo && slope <= kSlopeHi;
    detail += "M=" + std::to_string(m) + " slope " + fixed(slope, 4) + "; ";
  }
  detail += "gap/(M tau)^2 ratio M3:M1";
  for (std::size_t i = 0; i < kTaus.size(); ++i) {
    const double c1 = one[i].value_gap / std::pow(kTaus[i], 2);
    const double c3 = three[i].value_gap / std::pow(3.0 * kTaus[i], 2);
    const double ratio = c3 / c1;
    ok = ok && ratio <= kMultiStepBand && ratio >= 1.0 / kMultiStepBand;
    detail += " " + fixed(ratio);
  }
  detail += " (band x" + fixed(kMultiStepBand) + ")";
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// Criterion 5.

Outcome surrogate_term_mechanisms() {
  const FrozenProblem fp = frozen_problem();
  const auto& mc = world(1).theta_star.config();
  const meta::MetaProblem problem = meta::make_problem(mc, world(1).schedule, fp.batches);
  const double tau = 1e-2;
  const double lr = 1e-2;
  auto descend = [&](meta::SurrogateTerms terms) {
    std::vector<double> theta = fp.theta;
    for (int s = 0; s < kTermDescentSteps; ++s) {
      const auto g = meta::meta_grad_first_order(theta, problem, 1, tau, 1.0, terms);
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g.grad[i];
    }
    return theta;
  };
  const meta::GradStats before = meta::grad_stats(fp.theta, problem);
  const meta::GradStats after_norm =
      meta::grad_stats(descend({false, true, false}), problem);
  const meta::GradStats after_inner =
      meta::grad_stats(descend({false, false, true}), problem);
  const bool ok = after_norm.grad_norm_sq_ft < before.grad_norm_sq_ft &&
                  after_inner.cosine < before.cosine;
  return {ok, "norm-only |g_ft|^2 " + fixed(before.grad_norm_sq_ft) + " -> " +
                  fixed(after_norm.grad_norm_sq_ft) + "; inner-only cosine " +
                  fixed(before.cosine) + " -> " + fixed(after_inner.cosine) + " over " +
                  std::to_string(kTermDescentSteps) + " steps"};
}

// ---------------------------------------------------------------------------
// Criterion 6.

Outcome alignment_trend() {
  const SeedWorld& w = world(1);
  meta::MetaConfig m = meta_uce_config(w);
  m.outer_steps = kAlignmentSteps;
  const unlearn::UnlearnConfig u = uce_config();
  const auto init = unlearn::closed_form_unlearn(w.theta_star, u, w.table).params;
  diffusion::Rng rng(cli::stage_seed(w.config, cli::Stage::kUnlearn));
  const auto r = meta::meta_unlearn(init, m, u, w.theta_star, w.bundle, w.table, w.schedule, rng);
  const eval::LineFit fit = eval::alignment_series(r.records);
  return {fit.slope < 0.0, "OLS slope " + fixed(fit.slope) + " over " +
                               std::to_string(r.records.size()) + " outer steps (first " +
                               fixed(r.records.front().inner_product_norm) + ", last " +
                               fixed(r.records.back().inner_product_norm) + ")"};
}

// ---------------------------------------------------------------------------
// Criteria 7 and 8.

Outcome relearning_direction() {
  const std::vector<int> steps = {50, 100, 200, 300};
  bool ok = true;
  std::string detail;
  for (bool closed : {false, true}) {
    std::vector<double> un(steps.size(), 0.0), me(steps.size(), 0.0);
    for (int seed = 1; seed <= kSeeds; ++seed) {
      const CurvePair& c = curves(seed, closed);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        un[i] += curve_value_at(c.unlearned, steps[i], &attack::CurvePoint::forget_score) / kSeeds;
        me[i] += curve_value_at(c.meta, steps[i], &attack::CurvePoint::forget_score) / kSeeds;
      }
    }
    int not_worse = 0;
    detail += closed ? " | UCE" : "ESD-u";
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (me[i] <= un[i]) ++not_worse;
      detail += " " + std::to_string(steps[i]) + ":" + fixed(me[i]) + "/" + fixed(un[i]);
    }
    detail += " (" + std::to_string(not_worse) + "/4 meta<=unlearn)";
    ok = ok && not_worse >= kMinStepsNotWorse;
  }
  return {ok, detail};
}

Outcome self_destruct() {
  double un = 0.0, me = 0.0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const CurvePair& c = curves(seed, false);
    un += attack::retain_at_forget_threshold(c.unlearned, kForgetLossThreshold) / kSeeds;
    me += attack::retain_at_forget_threshold(c.meta, kForgetLossThreshold) / kSeeds;
  }
  return {me > un, "L_retain at first L_forget < " + fixed(kForgetLossThreshold) +
                       ": meta " + fixed(me, 4) + " vs unlearn " + fixed(un, 4) +
                       " (mean of " + std::to_string(kSeeds) + " seeds)"};
}

// ---------------------------------------------------------------------------
// Criterion 9.

Outcome benign_preservation() {
  const SeedWorld& w = world(1);
  const MethodModels& mm = models(1, false);
  attack::AttackConfig a;
  a.dataset = attack::AttackData::kBenign;
  a.checkpoints = {0, kBenignSteps};
  const auto r = attack::run_attack(mm.meta, a, w.bundle, w.table, w.schedule, false).curve;
  if (r.failed || r.points.size() != 2) return {false, "benign attack failed: " + r.failure};
  const auto& pre = r.points[0];
  const auto& post = r.points[1];
  const bool ok = post.retain_mmd <= kBenignMmdFactor * pre.retain_mmd &&
                  post.forget_score <= pre.forget_score + kBenignScoreBand;
  return {ok, "retain MMD " + fixed(pre.retain_mmd) + " -> " + fixed(post.retain_mmd) +
                  " (<= x" + fixed(kBenignMmdFactor) + "); forget score " +
                  fixed(pre.forget_score) + " -> " + fixed(post.forget_score) + " (<= +" +
                  fixed(kBenignScoreBand) + ")"};
}

// ---------------------------------------------------------------------------
// Criterion 10.

Outcome reduction_identities() {
  const fs::path dir = fs::temp_directory_path() / "metaunlearn_acceptance_c10";
  fs::remove_all(dir);
  cli::ExperimentConfig c = seed_config(1);
  c.out = dir.string();
  c.pretrain.steps = 300;
  c.unlearn = esd_config();
  c.unlearn.steps = 100;
  c.meta.outer_steps = c.unlearn.steps;
  c.meta.omega = c.unlearn.lr;
  c.meta.gamma1 = 1.0;
  c.meta.gamma2 = 0.0;
  std::ostringstream log;
  cli::CommandOptions opts{false, &log};
  bool cli_ok = cli::cmd_pretrain(c, opts) == cli::kExitOk &&
                cli::cmd_unlearn(c, opts) == cli::kExitOk &&
                cli::cmd_meta(c, opts) == cli::kExitOk;
  bool bit_identical = false;
  if (cli_ok) {
    const fs::path root = cli::run_root(c);
    const auto un = diffusion::load_checkpoint(root / "unlearn" / "theta.json");
    const auto me = diffusion::load_checkpoint(root / "meta" / "theta.json");
    bit_identical = un.params == me.params && !(un.params == diffusion::load_checkpoint(
                                                   root / "pretrain" / "theta_star.json")
                                                   .params);
  }
  fs::remove_all(dir);

  // tau = 0 on the pretrained model and frozen draws.
  const FrozenProblem fp = frozen_problem();
  const auto& mc = world(1).theta_star.config();
  const meta::MetaProblem problem = meta::make_problem(mc, world(1).schedule, fp.batches);
  const auto g = meta::meta_grad_exact(fp.theta, problem, 1, 0.0, 1.0).grad;
  ad::Tape tape;
  const Value th = tape.leaf(Value::vector(fp.theta));
  const auto g_ft = tape.grad(problem.ft(th), th, false).to_vector();
  std::vector<double> neg(g_ft.size());
  for (std::size_t i = 0; i < g_ft.size(); ++i) neg[i] = -g_ft[i];
  const double tau_dev = ad::relative_deviation(g, neg);

  // UCE with an empty forget set.
  const auto w_star = unlearn::attention_matrices(world(1).theta_star);
  std::vector<unlearn::Embedding> retain;
  for (const auto& [name, con] : world(1).table.concepts()) retain.push_back(con.embedding);
  const auto w = unlearn::uce_solve(w_star, {}, retain, world(1).table.null_embedding(), 1.0,
                                    0.1);
  double diff = 0.0;
  for (std::size_t m = 0; m < w.size(); ++m)
    for (std::size_t i = 0; i < w[m].data.size(); ++i)
      diff = std::max(diff, std::abs(w[m].data[i] - w_star[m].data[i]));

  const bool ok = cli_ok && bit_identical && tau_dev <= 1e-12 && diff <= 1e-12;
  return {ok, std::string("cmd_meta(gamma2=0) vs cmd_unlearn ") +
                  (bit_identical ? "bit-identical" : "DIFFERENT") +
                  "; tau=0 rel dev " + fixed(tau_dev) + "; empty-forget UCE max |W - W*| " +
                  fixed(diff)};
}

}  // namespace
}  // namespace metaunlearn

int main(int argc, char** argv) {
  using namespace metaunlearn;
  const std::vector<Criterion> criteria = {
      {1, "autodiff correctness", 60, autodiff_correctness},
      {2, "closed-form optimality", 60, closed_form_optimality},
      {3, "first-order approximation order", 120, approximation_order},
      {4, "multi-step equivalence", 120, multi_step_equivalence},
      {5, "surrogate terms in isolation", 120, surrogate_term_mechanisms},
      {6, "alignment downward trend (UCE meta)", 300, alignment_trend},
      {7, "slower relearning under attack", 900, relearning_direction},
      {8, "self-destruct of retain loss", 900, self_destruct},
      {9, "benign finetuning preservation", 300, benign_preservation},
      {10, "reduction identities", 60, reduction_identities},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      std::string what = e.what();
      o = {false, "exception: " + what.substr(0, what.find('\n'))};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool within_budget = secs <= c.budget_s;
    const bool passed = o.passed && within_budget;
    if (!passed) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s / budget %.0f s%s]\n",
                passed ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(), secs,
                c.budget_s, within_budget ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
