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

#include "metaunlearn/attack/attack.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metaunlearn/common/errors.h"
#include "metaunlearn/common/format.h"
#include "metaunlearn/eval/metrics.h"

namespace metaunlearn::attack {

using ad::Value;
using nlohmann::json;

std::string to_string(AttackData d) {
  switch (d) {
    case AttackData::kFtSingle:
      return "ft_single";
    case AttackData::kFtMulti:
      return "ft_multi";
    case AttackData::kBenign:
      return "benign";
  }
  return "unknown";
}

AttackData parse_attack_data(const std::string& name) {
  if (name == "ft_single") return AttackData::kFtSingle;
  if (name == "ft_multi") return AttackData::kFtMulti;
  if (name == "benign") return AttackData::kBenign;
  throw InvalidArgument("unknown attack dataset '" + name + "'");
}

void AttackConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("attack.lr", "must be positive");
  if (checkpoints.empty()) throw ConfigError("attack.checkpoints", "must not be empty");
  if (checkpoints.front() < 0) throw ConfigError("attack.checkpoints", "must be >= 0");
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i] <= checkpoints[i - 1]) {
      throw ConfigError("attack.checkpoints", "must be strictly increasing");
    }
  }
  if (batch_size == 0) throw ConfigError("attack.batch_size", "must be positive");
  if (dataset == AttackData::kFtMulti && paraphrases == 0) {
    throw ConfigError("attack.paraphrases", "must be positive");
  }
  if (score_samples < 100) throw ConfigError("attack.score_samples", "must be >= 100");
  if (mmd_samples < 2) throw ConfigError("attack.mmd_samples", "must be >= 2");
  if (loss_samples == 0) throw ConfigError("attack.loss_samples", "must be positive");
}

json attack_config_to_json(const AttackConfig& c) {
  return json{{"dataset", to_string(c.dataset)},
              {"optimizer", optim::to_string(c.optimizer)},
              {"lr", c.lr},
              {"checkpoints", c.checkpoints},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"paraphrases", c.paraphrases},
              {"paraphrase_scale", c.paraphrase_scale},
              {"score_samples", c.score_samples},
              {"mmd_samples", c.mmd_samples},
              {"loss_samples", c.loss_samples},
              {"eval_seed", c.eval_seed}};
}

AttackConfig attack_config_from_json(const json& j, const AttackConfig& base) {
  AttackConfig c = base;
  try {
    if (j.contains("dataset")) c.dataset = parse_attack_data(j["dataset"].get<std::string>());
    if (j.contains("optimizer")) {
      c.optimizer = optim::parse_optimizer(j["optimizer"].get<std::string>());
    }
    c.lr = j.value("lr", c.lr);
    c.checkpoints = j.value("checkpoints", c.checkpoints);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.paraphrases = j.value("paraphrases", c.paraphrases);
    c.paraphrase_scale = j.value("paraphrase_scale", c.paraphrase_scale);
    c.score_samples = j.value("score_samples", c.score_samples);
    c.mmd_samples = j.value("mmd_samples", c.mmd_samples);
    c.loss_samples = j.value("loss_samples", c.loss_samples);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
  } catch (const json::exception& e) {
    throw ConfigError("attack", e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError("attack", e.what());
  }
  c.validate();
  return c;
}

namespace {

// Fixed evaluation batches and draws, identical at every checkpoint.
struct EvalLosses {
  diffusion::Batch forget;
  diffusion::NoiseDraws forget_draws;
  diffusion::Batch retain;
  diffusion::NoiseDraws retain_draws;
};

EvalLosses eval_losses(const AttackConfig& config, const concepts::DatasetBundle& bundle,
                       const concepts::ConceptTable& table,
                       const diffusion::ModelConfig& model,
                       const diffusion::NoiseSchedule& schedule) {
  diffusion::Rng rng(config.eval_seed);
  EvalLosses e;
  e.forget = diffusion::sample_rows(concepts::make_batch(table, bundle.forget, model),
                                    config.loss_samples, rng);
  e.forget_draws = diffusion::draw_noise(e.forget.size(), model.data_dim, schedule, rng);
  e.retain = diffusion::sample_rows(concepts::make_batch(table, bundle.retain, model),
                                    config.loss_samples, rng);
  e.retain_draws = diffusion::draw_noise(e.retain.size(), model.data_dim, schedule, rng);
  return e;
}

CurvePoint measure(const diffusion::DenoiserParams& params, int step,
                   const AttackConfig& config, const EvalLosses& losses,
                   const concepts::ConceptTable& table,
                   const diffusion::NoiseSchedule& schedule) {
  ad::NoRecordGuard guard;
  const diffusion::ModelConfig& model = params.config();
  const Value theta = params.as_value();
  const eval::ModelView view{model, theta, schedule};
  CurvePoint p;
  p.step = step;
  p.forget_score = eval::forget_score(view, table, config.score_samples, config.eval_seed);
  p.l_forget = diffusion::diffusion_loss(model, theta, losses.forget, schedule,
                                         losses.forget_draws).item();
  p.l_retain = diffusion::diffusion_loss(model, theta, losses.retain, schedule,
                                         losses.retain_draws).item();
  const auto unrelated = table.names_with_role(concepts::ConceptRole::kUnrelatedRetain);
  std::uint64_t offset = 1;
  for (const std::string& name : unrelated) {
    p.retain_mmd += eval::retain_mmd(view, table, name, config.mmd_samples,
                                     config.eval_seed + offset++);
  }
  if (!unrelated.empty()) p.retain_mmd /= static_cast<double>(unrelated.size());
  return p;
}

}  // namespace

CurvePoint evaluate_point(const diffusion::DenoiserParams& params, int step,
                          const AttackConfig& config,
                          const concepts::DatasetBundle& bundle,
                          const concepts::ConceptTable& table,
                          const diffusion::NoiseSchedule& schedule) {
  return measure(params, step, config,
                 eval_losses(config, bundle, table, params.config(), schedule), table,
                 schedule);
}

diffusion::Batch attack_data(const AttackConfig& config,
                             const concepts::DatasetBundle& bundle,
                             const concepts::ConceptTable& table,
                             const diffusion::ModelConfig& model) {
  switch (config.dataset) {
    case AttackData::kFtSingle:
      return concepts::make_batch(table, bundle.ft_pool, model);
    case AttackData::kFtMulti: {
      const auto prompts = concepts::paraphrase_embeddings(
          table, config.paraphrases, config.paraphrase_scale, config.seed ^ 0x5bd1e995ULL);
      const std::size_t n = bundle.ft_pool.size();
      const std::size_t width =
          static_cast<std::size_t>(model.num_tokens * model.cond_dim);
      ad::Buffer cond;
      cond.reserve(n * width);
      for (std::size_t i = 0; i < n; ++i) {
        const auto tokens = concepts::condition_tokens(table, prompts[i % prompts.size()], model);
        cond.insert(cond.end(), tokens.begin(), tokens.end());
      }
      return diffusion::Batch{
          bundle.ft_pool.x,
          Value(ad::Shape{n, static_cast<std::size_t>(model.num_tokens),
                          static_cast<std::size_t>(model.cond_dim)},
                std::move(cond))};
    }
    case AttackData::kBenign:
      return concepts::make_batch(table, bundle.benign, model);
  }
  throw InvalidArgument("attack_data: unknown dataset");
}

AttackResult run_attack(const diffusion::DenoiserParams& released,
                        const AttackConfig& config,
                        const concepts::DatasetBundle& bundle,
                        const concepts::ConceptTable& table,
                        const diffusion::NoiseSchedule& schedule, bool keep_snapshots) {
  config.validate();
  const diffusion::ModelConfig& model = released.config();
  const diffusion::Batch data = attack_data(config, bundle, table, model);
  const EvalLosses losses = eval_losses(config, bundle, table, model, schedule);
  diffusion::Rng rng(config.seed);
  diffusion::DenoiserParams params = released;
  optim::Optimizer opt(config.optimizer, config.lr, params.size());
  AttackResult result;
  int step = 0;
  for (int target : config.checkpoints) {
    try {
      for (; step < target; ++step) {
        const diffusion::Batch batch = diffusion::sample_rows(data, config.batch_size, rng);
        const diffusion::NoiseDraws draws =
            diffusion::draw_noise(batch.size(), model.data_dim, schedule, rng);
        const diffusion::LossAndGrad lg =
            diffusion::diffusion_loss_grad(model, params.flat(), batch, schedule, draws);
        opt.step(params.flat(), lg.grad);
      }
      result.curve.points.push_back(measure(params, step, config, losses, table, schedule));
    } catch (const NumericalError& e) {
      result.curve.failed = true;
      result.curve.failure = "attack diverged before step " + std::to_string(target) +
                             ": " + e.what();
      break;
    }
    if (keep_snapshots) result.snapshots.push_back(params);
  }
  return result;
}

namespace {

// Linear interpolation of a's l_retain at forget loss `level`, if some
// segment of a brackets it.
bool interpolate_retain(const RelearnCurve& a, double level, double* out) {
  for (std::size_t i = 0; i + 1 < a.points.size(); ++i) {
    const double f0 = a.points[i].l_forget, f1 = a.points[i + 1].l_forget;
    if ((level - f0) * (level - f1) > 0.0) continue;
    const double r0 = a.points[i].l_retain, r1 = a.points[i + 1].l_retain;
    *out = f1 == f0 ? 0.5 * (r0 + r1) : r0 + (level - f0) / (f1 - f0) * (r1 - r0);
    return true;
  }
  return false;
}

}  // namespace

Verdict compare_runs(const RelearnCurve& a, const RelearnCurve& b, double band) {
  if (a.points.size() != b.points.size()) {
    throw InvalidArgument("compare_runs: curves have different step schedules");
  }
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (a.points[i].step != b.points[i].step) {
      throw InvalidArgument("compare_runs: curves have different step schedules");
    }
  }
  Verdict v;
  v.band = band;
  v.within_band = true;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const CurvePoint& pa = a.points[i];
    const CurvePoint& pb = b.points[i];
    v.deltas.push_back(StepDelta{pa.step, pb.forget_score - pa.forget_score,
                                 pb.l_forget - pa.l_forget, pb.l_retain - pa.l_retain,
                                 pb.retain_mmd - pa.retain_mmd});
    if (pb.forget_score <= pa.forget_score) ++v.steps_not_worse;
    if (std::abs(pb.forget_score - pa.forget_score) >= band) v.within_band = false;
  }
  v.slower_relearning = v.steps_not_worse == static_cast<int>(a.points.size());
  bool all_exceed = true;
  for (const CurvePoint& pb : b.points) {
    double a_retain = 0.0;
    if (!interpolate_retain(a, pb.l_forget, &a_retain)) continue;
    ++v.matched_levels;
    if (!(pb.l_retain > a_retain)) all_exceed = false;
  }
  v.self_destruct = v.matched_levels > 0 && all_exceed;
  return v;
}

double retain_at_forget_threshold(const RelearnCurve& curve, double threshold) {
  if (curve.points.empty()) throw InvalidArgument("retain_at_forget_threshold: empty curve");
  for (const CurvePoint& p : curve.points) {
    if (p.l_forget < threshold) return p.l_retain;
  }
  return curve.points.back().l_retain;
}

void write_curve_csv(const std::filesystem::path& path, const RelearnCurve& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCurveHeader << '\n';
  for (const CurvePoint& p : curve.points) {
    out << p.step << ',' << format_double(p.forget_score) << ','
        << format_double(p.l_forget) << ',' << format_double(p.l_retain) << ','
        << format_double(p.retain_mmd) << '\n';
  }
  if (curve.failed) out << "# failed: " << curve.failure << '\n';
}

RelearnCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("missing curve " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kCurveHeader) throw InvalidArgument(path.string() + ": unexpected header");
  RelearnCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# failed: ", 0) == 0) {
      curve.failed = true;
      curve.failure = line.substr(10);
      continue;
    }
    std::istringstream row(line);
    CurvePoint p;
    char sep = 0;
    row >> p.step >> sep >> p.forget_score >> sep >> p.l_forget >> sep >> p.l_retain >>
        sep >> p.retain_mmd;
    if (!row) throw InvalidArgument(path.string() + ": malformed row '" + line + "'");
    curve.points.push_back(p);
  }
  return curve;
}

json verdict_to_json(const Verdict& v) {
  json deltas = json::array();
  for (const StepDelta& d : v.deltas) {
    deltas.push_back({{"step", d.step},
                      {"forget_score", d.forget_score},
                      {"l_forget", d.l_forget},
                      {"l_retain", d.l_retain},
                      {"retain_mmd", d.retain_mmd}});
  }
  return json{{"deltas", deltas},
              {"slower_relearning", v.slower_relearning},
              {"steps_not_worse", v.steps_not_worse},
              {"self_destruct", v.self_destruct},
              {"matched_levels", v.matched_levels},
              {"within_band", v.within_band},
              {"band", v.band}};
}

}  // namespace metaunlearn::attack
