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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <Eigen/Dense>

#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/common/errors.h"
#include "metaunlearn/meta/meta.h"
#include "metaunlearn/meta/records.h"
#include "support/oracles.h"

namespace metaunlearn::meta {
namespace {

using ad::Shape;
using ad::Value;
using testing::QuadraticMeta;

Value mat_value(const Eigen::MatrixXd& m) {
  std::vector<double> d(m.size());
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) d[i * m.cols() + j] = m(i, j);
  return Value::matrix(m.rows(), m.cols(), d);
}

Value vec_value(const Eigen::VectorXd& v) {
  return Value::vector(std::vector<double>(v.data(), v.data() + v.size()));
}

// 0.5 t^T M t - b^T t built from tape primitives.
LossFn quadratic(const Eigen::MatrixXd& m, const Eigen::VectorXd& b) {
  Value mv = mat_value(m);
  Value bv = vec_value(b);
  const std::size_t n = b.size();
  return [mv, bv, n](const Value& t) {
    Value mt = ad::reshape(ad::matmul(mv, ad::reshape(t, Shape{n, 1})), Shape{n});
    return ad::dot(t, mt) * 0.5 - ad::dot(bv, t);
  };
}

MetaProblem problem_of(const QuadraticMeta& q) {
  return {quadratic(q.a_mat, q.a_vec), quadratic(q.b_mat, q.b_vec)};
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd random_point(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  return testing::max_relative_error(a, b);
}

TEST(MetaGradExact, MatchesHandDerivationOnQuadratics) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 5;
    QuadraticMeta q = testing::random_quadratic(rng, n);
    Eigen::VectorXd t = random_point(rng, n);
    for (int m : {1, 2, 3}) {
      for (double zeta : {0.0, 1.0, 2.5}) {
        MetaGrad g = meta_grad_exact(to_std(t), problem_of(q), m, 0.05, zeta);
        EXPECT_NEAR(g.value, q.meta_loss(t, m, 0.05, zeta),
                    1e-10 * (1.0 + std::abs(g.value)));
        EXPECT_LT(rel_err(g.grad, to_std(q.meta_grad(t, m, 0.05, zeta))), 1e-10)
            << "trial " << trial << " M=" << m << " zeta=" << zeta;
      }
    }
  }
}

TEST(MetaGradExact, MatchesFiniteDifferencesOfValue) {
  std::mt19937_64 rng(2);
  QuadraticMeta q = testing::random_quadratic(rng, 6);
  Eigen::VectorXd t = random_point(rng, 6);
  MetaProblem p = problem_of(q);
  for (int m : {1, 3}) {
    auto fd = testing::central_difference(
        [&](const std::vector<double>& x) { return meta_loss_value(x, p, m, 0.05, 1.0); },
        to_std(t), 1e-5);
    EXPECT_LT(rel_err(meta_grad_exact(to_std(t), p, m, 0.05, 1.0).grad, fd), 1e-7);
  }
}

TEST(MetaGradExact, DiffusionProblemMatchesFiniteDifferences) {
  diffusion::ModelConfig mc{2, 4, 4, 8, 1, diffusion::Activation::kSilu};
  auto schedule = diffusion::default_schedule();
  auto table = concepts::default_world(3);
  auto bundle = concepts::draw_split(table, {32, 16, 8, 8}, 4);
  diffusion::Rng rng(5);
  FrozenBatches b = draw_frozen(concepts::make_batch(table, bundle.forget, mc),
                                concepts::make_batch(table, bundle.retain, mc), 4, 6, mc,
                                schedule, rng);
  MetaProblem p = make_problem(mc, schedule, b);
  auto theta = diffusion::DenoiserParams::random(mc, 6).flat();
  for (int m : {1, 2}) {
    auto exact = meta_grad_exact(theta, p, m, 0.05, 1.0).grad;
    auto fd = testing::central_difference(
        [&](const std::vector<double>& x) { return meta_loss_value(x, p, m, 0.05, 1.0); },
        theta, 1e-5);
    EXPECT_LT(rel_err(exact, fd), 1e-6) << "M=" << m;
  }
}

TEST(MetaGradExact, ZeroInnerStepSizeGivesNegativeForgetGradient) {
  std::mt19937_64 rng(3);
  QuadraticMeta q = testing::random_quadratic(rng, 5);
  Eigen::VectorXd t = random_point(rng, 5);
  auto g = meta_grad_exact(to_std(t), problem_of(q), 2, 0.0, 3.0).grad;
  auto expected = to_std(-q.g_ft(t));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], expected[i], 1e-12);
}

TEST(MetaGradExact, DropForgetTermIsLinearSplit) {
  std::mt19937_64 rng(4);
  QuadraticMeta q = testing::random_quadratic(rng, 5);
  auto t = to_std(random_point(rng, 5));
  auto p = problem_of(q);
  auto full = meta_grad_exact(t, p, 2, 0.05, 1.5).grad;
  auto retain_only = meta_grad_exact(t, p, 2, 0.05, 1.5, true).grad;
  auto forget_only = meta_grad_exact(t, p, 2, 0.05, 0.0).grad;
  for (std::size_t i = 0; i < full.size(); ++i) {
    EXPECT_NEAR(full[i], retain_only[i] + forget_only[i], 1e-12);
  }
}

TEST(MetaGradFirstOrder, MatchesHandSurrogate) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    QuadraticMeta q = testing::random_quadratic(rng, 4);
    Eigen::VectorXd t = random_point(rng, 4);
    for (int m : {1, 3}) {
      MetaGrad g = meta_grad_first_order(to_std(t), problem_of(q), m, 0.02, 2.0);
      EXPECT_NEAR(g.value, q.surrogate(t, m, 0.02, 2.0), 1e-10 * (1.0 + std::abs(g.value)));
      EXPECT_LT(rel_err(g.grad, to_std(q.surrogate_grad(t, m, 0.02, 2.0))), 1e-10);
    }
  }
}

TEST(MetaGradFirstOrder, ErrorAgainstExactIsSecondOrderInTau) {
  std::mt19937_64 rng(6);
  QuadraticMeta q = testing::random_quadratic(rng, 5);
  auto t = to_std(random_point(rng, 5));
  auto p = problem_of(q);
  auto err = [&](double tau) {
    auto a = meta_grad_exact(t, p, 1, tau, 1.0).grad;
    auto b = meta_grad_first_order(t, p, 1, tau, 1.0).grad;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  const double ratio = err(1e-2) / err(5e-3);
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 5.0);
}

TEST(MetaGradFirstOrder, TermsToggle) {
  std::mt19937_64 rng(7);
  QuadraticMeta q = testing::random_quadratic(rng, 4);
  Eigen::VectorXd t = random_point(rng, 4);
  SurrogateTerms only_loss{true, false, false};
  auto g = meta_grad_first_order(to_std(t), problem_of(q), 1, 0.1, 1.0, only_loss).grad;
  auto expected = to_std(-q.g_ft(t));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], expected[i], 1e-12);
  SurrogateTerms none{false, false, false};
  auto z = meta_grad_first_order(to_std(t), problem_of(q), 1, 0.1, 1.0, none).grad;
  for (double v : z) EXPECT_EQ(v, 0.0);
}

TEST(MetaGrad, DispatchesOnMode) {
  std::mt19937_64 rng(8);
  QuadraticMeta q = testing::random_quadratic(rng, 4);
  auto t = to_std(random_point(rng, 4));
  auto p = problem_of(q);
  MetaConfig c;
  c.inner_steps = 2;
  c.tau = 0.03;
  c.zeta = 0.7;
  c.mode = MetaMode::kExact;
  EXPECT_EQ(meta_grad(t, p, c).grad, meta_grad_exact(t, p, 2, 0.03, 0.7).grad);
  c.mode = MetaMode::kFirstOrder;
  EXPECT_EQ(meta_grad(t, p, c).grad, meta_grad_first_order(t, p, 2, 0.03, 0.7).grad);
  c.drop_forget_term = true;
  SurrogateTerms no_loss{false, true, true};
  EXPECT_EQ(meta_grad(t, p, c).grad,
            meta_grad_first_order(t, p, 2, 0.03, 0.7, no_loss).grad);
}

TEST(InnerFinetune, PlainGradientSteps) {
  std::mt19937_64 rng(9);
  QuadraticMeta q = testing::random_quadratic(rng, 4);
  Eigen::VectorXd t = random_point(rng, 4);
  ad::Tape tape;
  Value th = tape.leaf(vec_value(t));
  Value out = inner_finetune(tape, th, quadratic(q.a_mat, q.a_vec), 3, 0.1, false);
  auto expected = to_std(q.inner(t, 3, 0.1));
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-13);
  EXPECT_THROW(inner_finetune(tape, th, quadratic(q.a_mat, q.a_vec), 0, 0.1, false),
               InvalidArgument);
}

TEST(MetaConfigs, ValidationAndJson) {
  MetaConfig c;
  EXPECT_NO_THROW(c.validate());
  c.inner_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.gamma2 = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_mode("second_order"), InvalidArgument);
  MetaConfig d;
  d.mode = MetaMode::kFirstOrder;
  d.inner_steps = 3;
  d.zeta = 10.0;
  d.two_stage = true;
  auto back = meta_config_from_json(meta_config_to_json(d));
  EXPECT_EQ(meta_config_to_json(back), meta_config_to_json(d));
  EXPECT_THROW(meta_config_from_json({{"mode", "bogus"}}), ConfigError);
  EXPECT_THROW(meta_config_from_json({{"tau", "x"}}), ConfigError);
}

TEST(Frozen, ReproducibleAndRejectsEmpty) {
  diffusion::ModelConfig mc;
  auto schedule = diffusion::default_schedule();
  auto table = concepts::default_world(1);
  auto bundle = concepts::draw_split(table, {32, 16, 8, 8}, 2);
  auto ft = concepts::make_batch(table, bundle.forget, mc);
  auto rt = concepts::make_batch(table, bundle.retain, mc);
  diffusion::Rng r1(3), r2(3);
  auto a = draw_frozen(ft, rt, 5, 7, mc, schedule, r1);
  auto b = draw_frozen(ft, rt, 5, 7, mc, schedule, r2);
  EXPECT_EQ(a.ft.x.to_vector(), b.ft.x.to_vector());
  EXPECT_EQ(a.retain_draws.t, b.retain_draws.t);
  EXPECT_EQ(a.retain.size(), 7u);
  FrozenBatches empty = a;
  empty.ft = diffusion::gather(a.ft, std::vector<std::size_t>{});
  EXPECT_THROW(make_problem(mc, schedule, empty), InvalidArgument);
}

struct MetaFixture {
  diffusion::ModelConfig mc;
  diffusion::NoiseSchedule schedule = diffusion::default_schedule();
  concepts::ConceptTable table = concepts::default_world(1);
  concepts::DatasetBundle bundle = concepts::draw_split(table, {64, 32, 8, 8}, 2);
  diffusion::DenoiserParams star = diffusion::DenoiserParams::random(mc, 11);
  unlearn::UnlearnConfig uc;
  MetaConfig meta;
  MetaFixture() {
    uc.steps = 4;
    uc.lr = 1e-2;
    uc.batch_size = 16;
    meta.outer_steps = 4;
    meta.omega = 1e-2;
    meta.ft_batch = 8;
    meta.retain_batch = 8;
  }
};

TEST(MetaUnlearn, ZeroMetaWeightReproducesPlainUnlearning) {
  MetaFixture f;
  f.meta.gamma2 = 0.0;
  diffusion::Rng r1(9), r2(9);
  auto plain = unlearn::run_unlearn(f.star, f.uc, f.bundle, f.table, f.schedule, r1);
  auto meta = meta_unlearn(f.star, f.meta, f.uc, f.star, f.bundle, f.table, f.schedule, r2);
  EXPECT_TRUE(meta.params == plain.params);
  ASSERT_EQ(meta.records.size(), plain.losses.size());
  for (std::size_t i = 0; i < plain.losses.size(); ++i) {
    EXPECT_EQ(meta.records[i].l_unlearn, plain.losses[i]);
  }
}

TEST(MetaUnlearn, UpdateComposesWeightedGradients) {
  MetaFixture f;
  f.meta.gamma1 = 0.7;
  f.meta.gamma2 = 0.3;
  int calls = 0;
  auto observer = [&](const StepParts& parts) {
    ++calls;
    ASSERT_NE(parts.g_unlearn, nullptr);
    ASSERT_NE(parts.g_meta, nullptr);
    for (std::size_t i = 0; i < parts.g_total->size(); ++i) {
      const double expected = 0.7 * (*parts.g_unlearn)[i] + 0.3 * (*parts.g_meta)[i];
      ASSERT_EQ((*parts.g_total)[i], expected) << i;
    }
  };
  diffusion::Rng rng(10);
  auto r = meta_unlearn(f.star, f.meta, f.uc, f.star, f.bundle, f.table, f.schedule, rng,
                        observer);
  EXPECT_EQ(calls, 4);
  ASSERT_EQ(r.records.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(r.records[i].step, i);
    EXPECT_TRUE(std::isfinite(r.records[i].l_meta));
    EXPECT_GE(r.records[i].grad_norm_sq_ft, 0.0);
    EXPECT_LE(std::abs(r.records[i].inner_product_norm), 1.0 + 1e-12);
  }
}

TEST(MetaUnlearn, Deterministic) {
  MetaFixture f;
  f.meta.mode = MetaMode::kFirstOrder;
  diffusion::Rng r1(12), r2(12);
  auto a = meta_unlearn(f.star, f.meta, f.uc, f.star, f.bundle, f.table, f.schedule, r1);
  auto b = meta_unlearn(f.star, f.meta, f.uc, f.star, f.bundle, f.table, f.schedule, r2);
  EXPECT_TRUE(a.params == b.params);
}

TEST(MetaUnlearn, TwoStageFlagMustMatchMethod) {
  MetaFixture f;
  diffusion::Rng rng(13);
  f.meta.two_stage = true;
  EXPECT_THROW(
      meta_unlearn(f.star, f.meta, f.uc, f.star, f.bundle, f.table, f.schedule, rng),
      InvalidArgument);
  f.meta.two_stage = false;
  f.uc.method = unlearn::Method::kUce;
  EXPECT_THROW(
      meta_unlearn(f.star, f.meta, f.uc, f.star, f.bundle, f.table, f.schedule, rng),
      InvalidArgument);
}

TEST(MetaUnlearn, TwoStageTakesMetaOnlySteps) {
  MetaFixture f;
  f.uc.method = unlearn::Method::kUce;
  f.meta.two_stage = true;
  f.meta.outer_steps = 2;
  auto init = unlearn::closed_form_unlearn(f.star, f.uc, f.table).params;
  bool saw = false;
  auto observer = [&](const StepParts& parts) {
    saw = true;
    EXPECT_EQ(parts.g_unlearn, nullptr);
    ASSERT_NE(parts.g_meta, nullptr);
    for (std::size_t i = 0; i < parts.g_total->size(); ++i) {
      ASSERT_EQ((*parts.g_total)[i], f.meta.gamma2 * (*parts.g_meta)[i]);
    }
  };
  diffusion::Rng rng(14);
  auto r = meta_unlearn(init, f.meta, f.uc, f.star, f.bundle, f.table, f.schedule, rng,
                        observer);
  EXPECT_TRUE(saw);
  EXPECT_FALSE(r.params == init);
  EXPECT_EQ(r.records[0].l_unlearn, 0.0);
}

TEST(Records, CsvRoundTrip) {
  std::vector<MetaStepRecord> recs = {{0, 0.5, -1.25, 3.0, 0.125, 7.5},
                                      {1, 1.0 / 3.0, -2.0, 1e-9, -0.75, 0.0}};
  auto path = std::filesystem::temp_directory_path() / "metaunlearn_records_test.csv";
  write_records_csv(path, recs);
  auto back = read_records_csv(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].step, recs[i].step);
    EXPECT_EQ(back[i].l_unlearn, recs[i].l_unlearn);
    EXPECT_EQ(back[i].l_meta, recs[i].l_meta);
    EXPECT_EQ(back[i].grad_norm_sq_ft, recs[i].grad_norm_sq_ft);
    EXPECT_EQ(back[i].inner_product_norm, recs[i].inner_product_norm);
    EXPECT_EQ(back[i].wall_ms, recs[i].wall_ms);
  }
  std::filesystem::remove(path);
  EXPECT_EQ(std::string(kRecordsHeader),
            "step,l_unlearn,l_meta,grad_norm_sq_ft,inner_product_norm,wall_ms");
}

}  // namespace
}  // namespace metaunlearn::meta
