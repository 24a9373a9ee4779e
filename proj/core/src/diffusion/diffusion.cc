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

#include "metaunlearn/diffusion/diffusion.h"

#include <cmath>

#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/common/errors.h"

namespace metaunlearn::diffusion {

using ad::Buffer;
using ad::Shape;
using ad::Value;

namespace {

Value gather_rows(const Value& v, std::span<const std::size_t> indices) {
  const std::size_t rows = v.shape()[0];
  const std::size_t width = rows == 0 ? 0 : v.size() / rows;
  Buffer out(indices.size() * width);
  const auto src = v.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) throw InvalidArgument("gather: row out of range");
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * width),
              src.begin() + static_cast<std::ptrdiff_t>((indices[i] + 1) * width),
              out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  Shape shape = v.shape();
  shape[0] = indices.size();
  return Value(shape, std::move(out));
}

Value stack_rows(const Value& a, const Value& b) {
  const Value parts[] = {a.detach(), b.detach()};
  ad::NoRecordGuard guard;
  return ad::concat(parts, 0);
}

void check_batch(const Batch& batch, const char* op) {
  if (batch.size() == 0) throw InvalidArgument(std::string(op) + ": empty batch");
}

}  // namespace

Batch gather(const Batch& batch, std::span<const std::size_t> indices) {
  return Batch{gather_rows(batch.x, indices), gather_rows(batch.cond, indices)};
}

Batch sample_rows(const Batch& batch, std::size_t count, Rng& rng) {
  check_batch(batch, "sample_rows");
  std::uniform_int_distribution<std::size_t> pick(0, batch.size() - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  return gather(batch, idx);
}

Batch concat_batches(const Batch& a, const Batch& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  return Batch{stack_rows(a.x, b.x), stack_rows(a.cond, b.cond)};
}

NoiseDraws draw_noise(std::size_t count, int data_dim,
                      const NoiseSchedule& schedule, Rng& rng) {
  std::uniform_int_distribution<int> step(1, schedule.steps);
  std::normal_distribution<double> normal(0.0, 1.0);
  NoiseDraws d;
  d.t.resize(count);
  Buffer eps(count * static_cast<std::size_t>(data_dim));
  // t and eps are drawn per batch element, interleaved.
  for (std::size_t i = 0; i < count; ++i) {
    d.t[i] = step(rng);
    for (int j = 0; j < data_dim; ++j) {
      eps[i * static_cast<std::size_t>(data_dim) + static_cast<std::size_t>(j)] =
          normal(rng);
    }
  }
  d.eps = Value(Shape{count, static_cast<std::size_t>(data_dim)}, std::move(eps));
  return d;
}

Value diffuse(const Value& x, const NoiseDraws& draws,
              const NoiseSchedule& schedule) {
  if (x.shape() != draws.eps.shape()) {
    throw InvalidArgument("diffuse: noise shape " +
                          ad::shape_string(draws.eps.shape()) +
                          " differs from data shape " +
                          ad::shape_string(x.shape()));
  }
  const std::size_t rows = x.shape()[0];
  const std::size_t width = x.shape()[1];
  Buffer out(x.size());
  const auto dx = x.data();
  const auto de = draws.eps.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double ab = schedule.alpha_bar_at(draws.t[i]);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    for (std::size_t j = 0; j < width; ++j) {
      out[i * width + j] = a * dx[i * width + j] + b * de[i * width + j];
    }
  }
  return Value(x.shape(), std::move(out));
}

Value diffusion_loss(const ModelConfig& config, const Value& theta,
                     const Batch& batch, const NoiseSchedule& schedule,
                     const NoiseDraws& draws) {
  check_batch(batch, "diffusion_loss");
  if (draws.t.size() != batch.size()) {
    throw InvalidArgument("diffusion_loss: draws do not match the batch size");
  }
  Value x_t = diffuse(batch.x.detach(), draws, schedule);
  Value pred = predict_noise(config, theta, x_t, draws.t, batch.cond);
  Value err = draws.eps - pred;
  return ad::scale(ad::sum(ad::square(err)),
                   1.0 / static_cast<double>(batch.size()));
}

Value diffusion_loss(const ModelConfig& config, const Value& theta,
                     const Batch& batch, const NoiseSchedule& schedule, Rng& rng) {
  check_batch(batch, "diffusion_loss");
  NoiseDraws draws = draw_noise(batch.size(), config.data_dim, schedule, rng);
  return diffusion_loss(config, theta, batch, schedule, draws);
}

Value sample_conditions(const ModelConfig& config, const Value& theta,
                        const Value& cond, const NoiseSchedule& schedule,
                        Rng& rng) {
  ad::NoRecordGuard guard;
  const std::size_t n = cond.shape().empty() ? 0 : cond.shape()[0];
  if (n == 0) throw InvalidArgument("sample: at least one sample is required");
  const auto d = static_cast<std::size_t>(config.data_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  Buffer x(n * d);
  for (double& v : x) v = normal(rng);
  const Value params = theta.detach();
  std::vector<int> steps(n);
  for (int t = schedule.steps; t >= 1; --t) {
    std::fill(steps.begin(), steps.end(), t);
    Value eps = predict_noise(config, params, Value(Shape{n, d}, x), steps, cond);
    const double beta = schedule.beta_at(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha_at(t));
    const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar_at(t));
    const double sigma = t > 1 ? schedule.sigma_at(t) : 0.0;
    const auto de = eps.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = inv_sqrt_alpha * (x[i] - coef * de[i]);
      if (t > 1) x[i] += sigma * normal(rng);
    }
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericalError("sample: chain diverged");
  }
  return Value(Shape{n, d}, std::move(x));
}

Value sample(const ModelConfig& config, const Value& theta,
             const Value& condition, const NoiseSchedule& schedule, Rng& rng,
             std::size_t n) {
  if (n == 0) throw InvalidArgument("sample: n must be >= 1");
  const auto k = static_cast<std::size_t>(config.cond_dim);
  const auto tokens = static_cast<std::size_t>(config.num_tokens);
  if (condition.size() != tokens * k) {
    throw InvalidArgument("sample: condition has shape " +
                          ad::shape_string(condition.shape()));
  }
  Buffer rows;
  rows.reserve(n * tokens * k);
  for (std::size_t i = 0; i < n; ++i) {
    rows.insert(rows.end(), condition.data().begin(), condition.data().end());
  }
  Value cond(Shape{n, tokens, k}, std::move(rows));
  return sample_conditions(config, theta, cond, schedule, rng);
}

LossAndGrad diffusion_loss_grad(const ModelConfig& config,
                                const std::vector<double>& params,
                                const Batch& batch, const NoiseSchedule& schedule,
                                const NoiseDraws& draws) {
  ad::Tape tape;
  Value theta = tape.leaf(Shape{params.size()}, params);
  Value loss = diffusion_loss(config, theta, batch, schedule, draws);
  LossAndGrad out;
  out.loss = loss.item();
  out.grad = tape.grad(loss, theta, false).to_vector();
  return out;
}

TrainLog train_diffusion(DenoiserParams& params, const Batch& data,
                         const NoiseSchedule& schedule, const TrainConfig& config,
                         Rng& rng) {
  check_batch(data, "train_diffusion");
  if (config.null_prob < 0.0 || config.null_prob >= 1.0) {
    throw InvalidArgument("train_diffusion: null_prob must be in [0, 1)");
  }
  const ModelConfig& mc = params.config();
  optim::Optimizer opt(config.optimizer, config.lr, params.size());
  std::bernoulli_distribution drop(config.null_prob);
  TrainLog log;
  log.losses.reserve(static_cast<std::size_t>(std::max(config.steps, 0)));
  for (int step = 0; step < config.steps; ++step) {
    Batch batch = sample_rows(data, config.batch_size, rng);
    if (config.null_prob > 0.0) {
      Buffer cond = batch.cond.to_vector();
      const std::size_t width = cond.size() / batch.size();
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (drop(rng)) {
          std::fill(cond.begin() + static_cast<std::ptrdiff_t>(i * width),
                    cond.begin() + static_cast<std::ptrdiff_t>((i + 1) * width),
                    0.0);
        }
      }
      batch.cond = Value(batch.cond.shape(), std::move(cond));
    }
    NoiseDraws draws = draw_noise(batch.size(), mc.data_dim, schedule, rng);
    LossAndGrad lg = diffusion_loss_grad(mc, params.flat(), batch, schedule, draws);
    log.losses.push_back(lg.loss);
    opt.step(params.flat(), lg.grad);
  }
  return log;
}

}  // namespace metaunlearn::diffusion
