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

#include "metaunlearn/unlearn/unlearn.h"

#include <algorithm>
#include <cmath>

#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/common/errors.h"

namespace metaunlearn::unlearn {

using ad::Shape;
using ad::Value;
using diffusion::Batch;
using nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
    case Method::kEsd:
      return "esd";
    case Method::kSdd:
      return "sdd";
    case Method::kUce:
      return "uce";
    case Method::kRece:
      return "rece";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "esd") return Method::kEsd;
  if (name == "sdd") return Method::kSdd;
  if (name == "uce") return Method::kUce;
  if (name == "rece") return Method::kRece;
  throw InvalidArgument("unknown unlearning method '" + name + "'");
}

bool is_closed_form(Method m) { return m == Method::kUce || m == Method::kRece; }

ParamMask ParamMask::preset(const std::string& name,
                            const diffusion::ModelConfig& config) {
  if (name == "full") return from_groups({"trunk", "time_embed", "attn", "head"}, config);
  if (name == "esd_x") return from_groups({"attn"}, config);
  if (name == "esd_u") return from_groups({"trunk", "time_embed", "head"}, config);
  throw InvalidArgument("unknown mask preset '" + name + "'");
}

ParamMask ParamMask::from_groups(const std::vector<std::string>& groups,
                                 const diffusion::ModelConfig& config) {
  ParamMask m;
  m.segments_ = diffusion::param_layout(config);
  bool any = false;
  for (const diffusion::Segment& s : m.segments_) {
    const bool on = std::find(groups.begin(), groups.end(), s.group) != groups.end();
    m.include_.push_back(on);
    any = any || on;
  }
  if (!any) throw InvalidArgument("ParamMask: at least one segment must be included");
  return m;
}

bool ParamMask::includes(const std::string& segment) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name == segment) return include_[i];
  }
  throw InvalidArgument("unknown parameter segment '" + segment + "'");
}

void ParamMask::apply(std::vector<double>& grad) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (include_[i]) continue;
    const diffusion::Segment& s = segments_[i];
    std::fill(grad.begin() + static_cast<std::ptrdiff_t>(s.offset),
              grad.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size()), 0.0);
  }
}

bool ParamMask::is_full() const {
  return std::all_of(include_.begin(), include_.end(), [](bool b) { return b; });
}

void UnlearnConfig::validate() const {
  if (method == Method::kEsd && !(eta > 0.0)) {
    throw ConfigError("unlearn.eta", "must be positive for ESD");
  }
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) {
    throw ConfigError("unlearn.ema_decay", "must be in [0, 1)");
  }
  if (steps < 0) throw ConfigError("unlearn.steps", "must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("unlearn.lr", "must be positive");
  if (batch_size == 0) throw ConfigError("unlearn.batch_size", "must be positive");
  if (lambda < 0.0) throw ConfigError("unlearn.lambda", "must be >= 0");
  if (lambda1 < 0.0) throw ConfigError("unlearn.lambda1", "must be >= 0");
  if (is_closed_form(method) && !(lambda2 > 0.0)) {
    throw ConfigError("unlearn.lambda2", "must be positive");
  }
  if (lambda_rece < 0.0) throw ConfigError("unlearn.lambda_rece", "must be >= 0");
  if (method == Method::kRece && rece_iters < 1) {
    throw ConfigError("unlearn.rece_iters", "must be >= 1");
  }
  if (xt_from_model && model_pool == 0) {
    throw ConfigError("unlearn.model_pool", "must be positive");
  }
  static const char* kMasks[] = {"full", "esd_x", "esd_u"};
  if (std::find_if(std::begin(kMasks), std::end(kMasks),
                   [&](const char* m) { return mask == m; }) == std::end(kMasks)) {
    throw ConfigError("unlearn.mask", "unknown preset '" + mask + "'");
  }
}

json unlearn_config_to_json(const UnlearnConfig& c) {
  return json{{"method", to_string(c.method)},
              {"eta", c.eta},
              {"mask", c.mask},
              {"steps", c.steps},
              {"lr", c.lr},
              {"optimizer", optim::to_string(c.optimizer)},
              {"batch_size", c.batch_size},
              {"ema_decay", c.ema_decay},
              {"lambda", c.lambda},
              {"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"lambda_rece", c.lambda_rece},
              {"rece_iters", c.rece_iters},
              {"xt_from_model", c.xt_from_model},
              {"model_pool", c.model_pool}};
}

UnlearnConfig unlearn_config_from_json(const json& j, const UnlearnConfig& base) {
  UnlearnConfig c = base;
  try {
    if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
    if (j.contains("optimizer")) {
      c.optimizer = optim::parse_optimizer(j["optimizer"].get<std::string>());
    }
    c.eta = j.value("eta", c.eta);
    c.mask = j.value("mask", c.mask);
    c.steps = j.value("steps", c.steps);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.ema_decay = j.value("ema_decay", c.ema_decay);
    c.lambda = j.value("lambda", c.lambda);
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.lambda_rece = j.value("lambda_rece", c.lambda_rece);
    c.rece_iters = j.value("rece_iters", c.rece_iters);
    c.xt_from_model = j.value("xt_from_model", c.xt_from_model);
    c.model_pool = j.value("model_pool", c.model_pool);
  } catch (const json::exception& e) {
    throw ConfigError("unlearn", e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError("unlearn", e.what());
  }
  c.validate();
  return c;
}

Value esd_target(const Value& eps_c, const Value& eps_null, double eta) {
  if (eps_c.shape() != eps_null.shape()) {
    throw InvalidArgument("esd_target: prediction shapes differ");
  }
  ad::NoRecordGuard guard;
  return eps_null.detach() - (eps_c.detach() - eps_null.detach()) * eta;
}

namespace {

Value null_like(const Value& cond) { return Value::zeros(cond.shape()); }

Value batch_mean_sq(const Value& pred, const Value& target, std::size_t n) {
  return ad::scale(ad::sum(ad::square(pred - target)), 1.0 / static_cast<double>(n));
}

}  // namespace

Value esd_loss(const diffusion::ModelConfig& config, const Value& theta,
               const Value& theta_star, const Batch& batch, double eta,
               const diffusion::NoiseSchedule& schedule,
               const diffusion::NoiseDraws& draws) {
  if (batch.size() == 0) throw InvalidArgument("esd_loss: empty batch");
  const Value x_t = diffusion::diffuse(batch.x.detach(), draws, schedule);
  Value target;
  {
    ad::NoRecordGuard guard;
    const Value frozen = theta_star.detach();
    const Value eps_c = diffusion::predict_noise(config, frozen, x_t, draws.t, batch.cond);
    const Value eps_null =
        diffusion::predict_noise(config, frozen, x_t, draws.t, null_like(batch.cond));
    target = esd_target(eps_c, eps_null, eta);
  }
  const Value pred = diffusion::predict_noise(config, theta, x_t, draws.t, batch.cond);
  return batch_mean_sq(pred, target, batch.size());
}

Value sdd_loss(const diffusion::ModelConfig& config, const Value& theta,
               const Value& teacher, const Batch& batch,
               const diffusion::NoiseSchedule& schedule,
               const diffusion::NoiseDraws& draws) {
  if (batch.size() == 0) throw InvalidArgument("sdd_loss: empty batch");
  const Value x_t = diffusion::diffuse(batch.x.detach(), draws, schedule);
  const Value target = ad::stop_gradient(
      diffusion::predict_noise(config, teacher, x_t, draws.t, null_like(batch.cond)));
  const Value pred = diffusion::predict_noise(config, theta, x_t, draws.t, batch.cond);
  return batch_mean_sq(pred, target, batch.size());
}

void ema_update(std::vector<double>& teacher, const std::vector<double>& student,
                double mu) {
  if (!(mu >= 0.0 && mu < 1.0)) throw InvalidArgument("ema_update: mu must be in [0, 1)");
  if (teacher.size() != student.size()) {
    throw InvalidArgument("ema_update: size mismatch");
  }
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i] = mu * teacher[i] + (1.0 - mu) * student[i];
  }
}

std::vector<Mat> attention_matrices(const diffusion::DenoiserParams& params) {
  std::vector<Mat> out;
  for (const std::string& name : edited_segments()) {
    const diffusion::Segment& s = params.find(name);
    const auto view = params.segment(name);
    out.emplace_back(s.rows, s.cols, std::vector<double>(view.begin(), view.end()));
  }
  return out;
}

void set_attention_matrices(diffusion::DenoiserParams& params,
                            const std::vector<Mat>& mats) {
  const auto& names = edited_segments();
  if (mats.size() != names.size()) {
    throw InvalidArgument("set_attention_matrices: expected " +
                          std::to_string(names.size()) + " matrices");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto view = params.segment(names[i]);
    if (mats[i].data.size() != view.size()) {
      throw InvalidArgument("set_attention_matrices: shape mismatch for " + names[i]);
    }
    std::copy(mats[i].data.begin(), mats[i].data.end(), view.begin());
  }
}

UnlearnObjective::UnlearnObjective(const diffusion::DenoiserParams& theta_star,
                                   const UnlearnConfig& config,
                                   const concepts::DatasetBundle& bundle,
                                   const concepts::ConceptTable& table,
                                   const diffusion::NoiseSchedule& schedule,
                                   diffusion::Rng& rng)
    : model_(theta_star.config()),
      config_(config),
      schedule_(schedule),
      theta_star_(theta_star.as_value()),
      teacher_(theta_star.flat()) {
  config_.validate();
  if (is_closed_form(config_.method)) {
    throw InvalidArgument("UnlearnObjective: " + to_string(config_.method) +
                          " has no gradient objective");
  }
  if (config_.xt_from_model) {
    const std::string f = table.forget().name;
    const Value cond = concepts::concept_condition(table, f, model_);
    concepts::Samples pool{
        diffusion::sample(model_, theta_star_, cond, schedule_, rng, config_.model_pool),
        std::vector<std::string>(config_.model_pool, f)};
    forget_ = concepts::make_batch(table, pool, model_);
  } else {
    forget_ = concepts::make_batch(table, bundle.forget, model_);
  }
  if (config_.lambda > 0.0) retain_ = concepts::make_batch(table, bundle.retain, model_);
}

diffusion::LossAndGrad UnlearnObjective::loss_grad(const std::vector<double>& theta,
                                                   diffusion::Rng& rng) const {
  const Batch batch = diffusion::sample_rows(forget_, config_.batch_size, rng);
  const diffusion::NoiseDraws draws =
      diffusion::draw_noise(batch.size(), model_.data_dim, schedule_, rng);
  ad::Tape tape;
  const Value th = tape.leaf(Shape{theta.size()}, theta);
  Value loss;
  if (config_.method == Method::kEsd) {
    loss = esd_loss(model_, th, theta_star_, batch, config_.eta, schedule_, draws);
  } else {
    loss = sdd_loss(model_, th, Value::vector(teacher_), batch, schedule_, draws);
  }
  if (config_.lambda > 0.0) {
    const Batch rb = diffusion::sample_rows(retain_, config_.batch_size, rng);
    const diffusion::NoiseDraws rd =
        diffusion::draw_noise(rb.size(), model_.data_dim, schedule_, rng);
    loss = loss + diffusion::diffusion_loss(model_, th, rb, schedule_, rd) * config_.lambda;
  }
  diffusion::LossAndGrad out;
  out.loss = loss.item();
  out.grad = tape.grad(loss, th, false).to_vector();
  return out;
}

void UnlearnObjective::after_step(const std::vector<double>& theta) {
  if (config_.method == Method::kSdd) ema_update(teacher_, theta, config_.ema_decay);
}

UnlearnResult closed_form_unlearn(const diffusion::DenoiserParams& theta_star,
                                  const UnlearnConfig& config,
                                  const concepts::ConceptTable& table) {
  config.validate();
  std::vector<Embedding> forget, retain;
  for (const auto& [name, c] : table.concepts()) {
    (c.role == concepts::ConceptRole::kForget ? forget : retain).push_back(c.embedding);
  }
  const std::vector<Mat> w_star = attention_matrices(theta_star);
  UnlearnResult r{theta_star, {}, {}};
  if (config.method == Method::kUce) {
    set_attention_matrices(r.params, uce_solve(w_star, forget, retain,
                                               table.null_embedding(),
                                               config.lambda1, config.lambda2));
  } else if (config.method == Method::kRece) {
    ReceResult rece = rece_solve(w_star, forget, retain, table.null_embedding(),
                                 config.lambda1, config.lambda2, config.lambda_rece,
                                 config.rece_iters);
    set_attention_matrices(r.params, rece.w);
    r.rece_embeddings = std::move(rece.embeddings);
  } else {
    throw InvalidArgument("closed_form_unlearn: method " + to_string(config.method) +
                          " is gradient based");
  }
  return r;
}

UnlearnResult run_unlearn(const diffusion::DenoiserParams& theta_star,
                          const UnlearnConfig& config,
                          const concepts::DatasetBundle& bundle,
                          const concepts::ConceptTable& table,
                          const diffusion::NoiseSchedule& schedule,
                          diffusion::Rng& rng) {
  if (is_closed_form(config.method)) return closed_form_unlearn(theta_star, config, table);
  UnlearnObjective objective(theta_star, config, bundle, table, schedule, rng);
  const ParamMask mask = ParamMask::preset(config.mask, theta_star.config());
  UnlearnResult r{theta_star, {}, {}};
  optim::Optimizer opt(config.optimizer, config.lr, r.params.size());
  for (int step = 0; step < config.steps; ++step) {
    diffusion::LossAndGrad lg;
    try {
      lg = objective.loss_grad(r.params.flat(), rng);
    } catch (const NumericalError& e) {
      throw NumericalError("unlearn step " + std::to_string(step) + ": " + e.what());
    }
    mask.apply(lg.grad);
    r.losses.push_back(lg.loss);
    opt.step(r.params.flat(), lg.grad);
    objective.after_step(r.params.flat());
  }
  return r;
}

}  // namespace metaunlearn::unlearn
