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

#include "metaunlearn/meta/meta.h"

#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>

#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/common/errors.h"

namespace metaunlearn::meta {

using ad::Shape;
using ad::Value;
using nlohmann::json;

std::string to_string(MetaMode mode) {
  return mode == MetaMode::kExact ? "exact" : "first_order";
}

MetaMode parse_mode(const std::string& name) {
  if (name == "exact") return MetaMode::kExact;
  if (name == "first_order") return MetaMode::kFirstOrder;
  throw InvalidArgument("unknown meta mode '" + name + "'");
}

void MetaConfig::validate() const {
  if (outer_steps < 1) throw ConfigError("meta.outer_steps", "must be >= 1");
  if (inner_steps < 1) throw ConfigError("meta.inner_steps", "must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("meta.tau", "must be positive");
  if (!(omega > 0.0)) throw ConfigError("meta.omega", "must be positive");
  if (gamma1 < 0.0) throw ConfigError("meta.gamma1", "must be >= 0");
  if (gamma2 < 0.0) throw ConfigError("meta.gamma2", "must be >= 0");
  if (zeta < 0.0) throw ConfigError("meta.zeta", "must be >= 0");
  if (ft_batch == 0) throw ConfigError("meta.ft_batch", "must be positive");
  if (retain_batch == 0) throw ConfigError("meta.retain_batch", "must be positive");
}

json meta_config_to_json(const MetaConfig& c) {
  return json{{"outer_steps", c.outer_steps},   {"inner_steps", c.inner_steps},
              {"tau", c.tau},                   {"omega", c.omega},
              {"gamma1", c.gamma1},             {"gamma2", c.gamma2},
              {"zeta", c.zeta},                 {"ft_batch", c.ft_batch},
              {"retain_batch", c.retain_batch}, {"mode", to_string(c.mode)},
              {"two_stage", c.two_stage},       {"drop_forget_term", c.drop_forget_term},
              {"seed", c.seed}};
}

MetaConfig meta_config_from_json(const json& j, const MetaConfig& base) {
  MetaConfig c = base;
  try {
    c.outer_steps = j.value("outer_steps", c.outer_steps);
    c.inner_steps = j.value("inner_steps", c.inner_steps);
    c.tau = j.value("tau", c.tau);
    c.omega = j.value("omega", c.omega);
    c.gamma1 = j.value("gamma1", c.gamma1);
    c.gamma2 = j.value("gamma2", c.gamma2);
    c.zeta = j.value("zeta", c.zeta);
    c.ft_batch = j.value("ft_batch", c.ft_batch);
    c.retain_batch = j.value("retain_batch", c.retain_batch);
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    c.two_stage = j.value("two_stage", c.two_stage);
    c.drop_forget_term = j.value("drop_forget_term", c.drop_forget_term);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError("meta", e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError("meta.mode", e.what());
  }
  c.validate();
  return c;
}

Value inner_finetune(const ad::Tape& tape, const Value& theta, const LossFn& loss,
                     int steps, double tau, bool create_graph) {
  if (steps < 1) throw InvalidArgument("inner_finetune: steps must be >= 1");
  Value cur = theta;
  for (int m = 0; m < steps; ++m) {
    try {
      const Value l = loss(cur);
      const Value g = tape.grad(l, cur, create_graph);
      cur = cur - g * tau;
    } catch (const NumericalError& e) {
      throw NumericalError("inner finetune step " + std::to_string(m) + ": " + e.what());
    }
  }
  return cur;
}

Value meta_loss(const Value& theta_ft, const Value& theta, const MetaProblem& problem,
                double zeta, bool drop_forget_term) {
  Value out = Value::scalar(0.0);
  if (!drop_forget_term) out = -problem.ft(theta_ft);
  if (zeta != 0.0) {
    out = out - (problem.retain(theta_ft) - problem.retain(theta)) * zeta;
  }
  return out;
}

Value surrogate_loss(const ad::Tape& tape, const Value& theta,
                     const MetaProblem& problem, int steps, double tau, double zeta,
                     const SurrogateTerms& terms) {
  const double step = static_cast<double>(steps) * tau;
  const Value l_ft = problem.ft(theta);
  Value out = Value::scalar(0.0);
  if (terms.loss) out = -l_ft;
  if (terms.norm || terms.inner) {
    const Value g_ft = tape.grad(l_ft, theta, true);
    if (terms.norm) out = out + ad::dot(g_ft, g_ft) * step;
    if (terms.inner && zeta != 0.0) {
      const Value g_r = tape.grad(problem.retain(theta), theta, true);
      out = out + ad::dot(g_ft, g_r) * (step * zeta);
    }
  }
  return out;
}

MetaGrad meta_grad_exact(const std::vector<double>& theta, const MetaProblem& problem,
                         int steps, double tau, double zeta, bool drop_forget_term) {
  ad::Tape tape(true);
  const Value th = tape.leaf(Shape{theta.size()}, theta);
  const Value ft = inner_finetune(tape, th, problem.ft, steps, tau, true);
  const Value l = meta_loss(ft, th, problem, zeta, drop_forget_term);
  MetaGrad out;
  out.value = l.item();
  out.grad = tape.grad(l, th, false).to_vector();
  return out;
}

double meta_loss_value(const std::vector<double>& theta, const MetaProblem& problem,
                       int steps, double tau, double zeta, bool drop_forget_term) {
  ad::Tape tape;
  const Value th = tape.leaf(Shape{theta.size()}, theta);
  const Value ft = inner_finetune(tape, th, problem.ft, steps, tau, false);
  ad::NoRecordGuard guard;
  return meta_loss(ft.detach(), th.detach(), problem, zeta, drop_forget_term).item();
}

MetaGrad meta_grad_first_order(const std::vector<double>& theta,
                               const MetaProblem& problem, int steps, double tau,
                               double zeta, const SurrogateTerms& terms) {
  if (steps < 1) throw InvalidArgument("meta_grad_first_order: steps must be >= 1");
  ad::Tape tape(true);
  const Value th = tape.leaf(Shape{theta.size()}, theta);
  const Value s = surrogate_loss(tape, th, problem, steps, tau, zeta, terms);
  MetaGrad out;
  out.value = s.item();
  out.grad = tape.grad(s, th, false).to_vector();
  return out;
}

FrozenBatches draw_frozen(const diffusion::Batch& ft_source,
                          const diffusion::Batch& retain_source, std::size_t ft_batch,
                          std::size_t retain_batch, const diffusion::ModelConfig& model,
                          const diffusion::NoiseSchedule& schedule, diffusion::Rng& rng) {
  FrozenBatches b;
  b.ft = diffusion::sample_rows(ft_source, ft_batch, rng);
  b.ft_draws = diffusion::draw_noise(b.ft.size(), model.data_dim, schedule, rng);
  b.retain = diffusion::sample_rows(retain_source, retain_batch, rng);
  b.retain_draws = diffusion::draw_noise(b.retain.size(), model.data_dim, schedule, rng);
  return b;
}

MetaProblem make_problem(const diffusion::ModelConfig& model,
                         const diffusion::NoiseSchedule& schedule,
                         const FrozenBatches& batches) {
  if (batches.ft.size() == 0 || batches.retain.size() == 0) {
    throw InvalidArgument("meta: empty finetune or retain batch");
  }
  MetaProblem p;
  p.ft = [&model, &schedule, &batches](const Value& theta) {
    return diffusion::diffusion_loss(model, theta, batches.ft, schedule, batches.ft_draws);
  };
  p.retain = [&model, &schedule, &batches](const Value& theta) {
    return diffusion::diffusion_loss(model, theta, batches.retain, schedule,
                                     batches.retain_draws);
  };
  return p;
}

GradStats grad_stats(const std::vector<double>& theta, const MetaProblem& problem) {
  ad::Tape tape;
  const Value th = tape.leaf(Shape{theta.size()}, theta);
  const auto g_ft = tape.grad(problem.ft(th), th, false).to_vector();
  const auto g_r = tape.grad(problem.retain(th), th, false).to_vector();
  double ff = 0.0, rr = 0.0, fr = 0.0;
  for (std::size_t i = 0; i < g_ft.size(); ++i) {
    ff += g_ft[i] * g_ft[i];
    rr += g_r[i] * g_r[i];
    fr += g_ft[i] * g_r[i];
  }
  GradStats s;
  s.grad_norm_sq_ft = ff;
  s.cosine = (ff > 0.0 && rr > 0.0) ? fr / std::sqrt(ff * rr) : 0.0;
  return s;
}

MetaGrad meta_grad(const std::vector<double>& theta, const MetaProblem& problem,
                   const MetaConfig& config) {
  if (config.mode == MetaMode::kExact) {
    return meta_grad_exact(theta, problem, config.inner_steps, config.tau, config.zeta,
                           config.drop_forget_term);
  }
  SurrogateTerms terms;
  terms.loss = !config.drop_forget_term;
  return meta_grad_first_order(theta, problem, config.inner_steps, config.tau,
                               config.zeta, terms);
}

namespace {

std::string dump_records(const std::vector<MetaStepRecord>& records) {
  std::ostringstream os;
  os << kRecordsHeader << '\n';
  for (const MetaStepRecord& r : records) os << record_csv_row(r) << '\n';
  return os.str();
}

}  // namespace

MetaResult meta_unlearn(const diffusion::DenoiserParams& theta_init,
                        const MetaConfig& config,
                        const unlearn::UnlearnConfig& unlearn_config,
                        const diffusion::DenoiserParams& theta_star,
                        const concepts::DatasetBundle& bundle,
                        const concepts::ConceptTable& table,
                        const diffusion::NoiseSchedule& schedule, diffusion::Rng& rng,
                        const StepObserver& observer) {
  config.validate();
  unlearn_config.validate();
  const bool closed = unlearn::is_closed_form(unlearn_config.method);
  if (config.two_stage != closed) {
    throw InvalidArgument(config.two_stage
                              ? "meta_unlearn: two_stage requires a closed-form method"
                              : "meta_unlearn: closed-form methods require two_stage");
  }
  const diffusion::ModelConfig& model = theta_init.config();
  std::optional<unlearn::UnlearnObjective> objective;
  if (!config.two_stage) {
    objective.emplace(theta_star, unlearn_config, bundle, table, schedule, rng);
  }
  const unlearn::ParamMask mask = unlearn::ParamMask::preset(
      config.two_stage ? "full" : unlearn_config.mask, model);
  const diffusion::Batch ft_source = concepts::make_batch(table, bundle.forget, model);
  const diffusion::Batch retain_source = concepts::make_batch(table, bundle.retain, model);

  diffusion::Rng meta_rng(config.seed);
  MetaResult result{theta_init, {}};
  std::vector<double>& theta = result.params.flat();
  optim::Optimizer opt(unlearn_config.optimizer, config.omega, theta.size());
  std::vector<double> g(theta.size());
  std::vector<double> g_unlearn, g_meta;

  for (int step = 0; step < config.outer_steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    MetaStepRecord rec;
    rec.step = step;
    try {
      std::fill(g.begin(), g.end(), 0.0);
      if (objective) {
        diffusion::LossAndGrad lg = objective->loss_grad(theta, rng);
        rec.l_unlearn = lg.loss;
        g_unlearn = std::move(lg.grad);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = config.gamma1 * g_unlearn[i];
      }
      const FrozenBatches batches =
          draw_frozen(ft_source, retain_source, config.ft_batch, config.retain_batch,
                      model, schedule, meta_rng);
      const MetaProblem problem = make_problem(model, schedule, batches);
      const GradStats stats = grad_stats(theta, problem);
      rec.grad_norm_sq_ft = stats.grad_norm_sq_ft;
      rec.inner_product_norm = stats.cosine;
      if (config.gamma2 != 0.0) {
        MetaGrad mg = meta_grad(theta, problem, config);
        rec.l_meta = mg.value;
        g_meta = std::move(mg.grad);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += config.gamma2 * g_meta[i];
      } else {
        rec.l_meta = meta_loss_value(theta, problem, config.inner_steps, config.tau,
                                     config.zeta, config.drop_forget_term);
      }
      if (observer) {
        observer(StepParts{step, objective ? &g_unlearn : nullptr,
                           config.gamma2 != 0.0 ? &g_meta : nullptr, &g});
      }
      mask.apply(g);
      for (double v : g) {
        if (!std::isfinite(v)) throw NumericalError("non-finite update");
      }
      opt.step(theta, g);
      if (objective) objective->after_step(theta);
    } catch (const NumericalError& e) {
      throw NumericalError("meta_unlearn outer step " + std::to_string(step) + ": " +
                           e.what() + "\nrecords so far:\n" +
                           dump_records(result.records));
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.records.push_back(rec);
  }
  return result;
}

}  // namespace metaunlearn::meta
