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

#ifndef METAUNLEARN_DIFFUSION_DIFFUSION_H_
#define METAUNLEARN_DIFFUSION_DIFFUSION_H_

#include <random>
#include <vector>

#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/diffusion/model.h"
#include "metaunlearn/diffusion/schedule.h"
#include "metaunlearn/optim/optimizer.h"

namespace metaunlearn::diffusion {

using Rng = std::mt19937_64;

// Conditioned samples: x is [B, data_dim], cond is [B, num_tokens, cond_dim]
// (or [B, cond_dim] for single-token models).
struct Batch {
  ad::Value x;
  ad::Value cond;
  std::size_t size() const { return x.defined() ? x.shape()[0] : 0; }
};

// Rows `indices` of a batch.
Batch gather(const Batch& batch, std::span<const std::size_t> indices);
// `count` rows drawn uniformly with replacement.
Batch sample_rows(const Batch& batch, std::size_t count, Rng& rng);
// Row-wise concatenation.
Batch concat_batches(const Batch& a, const Batch& b);

// Frozen timestep and noise draws for a batch. Reusing one NoiseDraws across
// several loss evaluations makes them deterministic functions of theta.
struct NoiseDraws {
  std::vector<int> t;
  ad::Value eps;  // [B, data_dim]
};

NoiseDraws draw_noise(std::size_t count, int data_dim,
                      const NoiseSchedule& schedule, Rng& rng);

// Forward-diffused inputs x_t for the whole batch (a constant).
ad::Value diffuse(const ad::Value& x, const NoiseDraws& draws,
                  const NoiseSchedule& schedule);

// Mean over the batch of ||eps - eps_theta(x_t, c)||^2 (sum over coordinates).
ad::Value diffusion_loss(const ModelConfig& config, const ad::Value& theta,
                         const Batch& batch, const NoiseSchedule& schedule,
                         const NoiseDraws& draws);
ad::Value diffusion_loss(const ModelConfig& config, const ad::Value& theta,
                         const Batch& batch, const NoiseSchedule& schedule,
                         Rng& rng);

// Ancestral sampling for a batch of conditions ([n, ...] as in Batch::cond).
// Starts from x_T ~ N(0, I); no noise is added at t = 1.
ad::Value sample_conditions(const ModelConfig& config, const ad::Value& theta,
                            const ad::Value& cond, const NoiseSchedule& schedule,
                            Rng& rng);

// `n` samples under a single condition of shape [num_tokens, cond_dim] or
// [cond_dim].
ad::Value sample(const ModelConfig& config, const ad::Value& theta,
                 const ad::Value& condition, const NoiseSchedule& schedule,
                 Rng& rng, std::size_t n);

struct TrainConfig {
  int steps = 8000;
  double lr = 1e-3;
  std::size_t batch_size = 128;
  // Probability of replacing a sample's condition with the null embedding,
  // which trains the unconditional branch.
  double null_prob = 0.1;
  optim::OptimizerKind optimizer = optim::OptimizerKind::kAdam;
};

struct TrainLog {
  std::vector<double> losses;
};

// Minimises the diffusion loss over `data` in place.
TrainLog train_diffusion(DenoiserParams& params, const Batch& data,
                         const NoiseSchedule& schedule, const TrainConfig& config,
                         Rng& rng);

// One gradient of the diffusion loss at `params` for fixed draws.
struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};
LossAndGrad diffusion_loss_grad(const ModelConfig& config,
                                const std::vector<double>& params,
                                const Batch& batch, const NoiseSchedule& schedule,
                                const NoiseDraws& draws);

}  // namespace metaunlearn::diffusion

#endif  // METAUNLEARN_DIFFUSION_DIFFUSION_H_
