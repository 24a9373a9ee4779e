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

// Meta-unlearning: the outer loop optimises the released parameters so that
// a simulated finetuning attack (M plain gradient steps of size tau on the
// forget data) makes little progress, while the same attack degrades the
// related retained concepts.
//
//   theta_FT = theta - tau * grad L_ft(theta)            (repeated M times)
//   L_meta   = -L_ft(theta_FT) - zeta * [L_r(theta_FT) - L_r(theta)]
//
// The first-order surrogate expands L_meta around theta with step M * tau:
//
//   S = -L_ft(theta) + M tau |g_ft|^2 + M tau zeta g_ft . g_r
//
// Both need second derivatives, so gradients run on higher-order tapes.

#ifndef METAUNLEARN_META_META_H_
#define METAUNLEARN_META_META_H_

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/meta/records.h"
#include "metaunlearn/unlearn/unlearn.h"

namespace metaunlearn::meta {

enum class MetaMode { kExact, kFirstOrder };

std::string to_string(MetaMode mode);
MetaMode parse_mode(const std::string& name);

struct MetaConfig {
  int outer_steps = 1000;  // N
  int inner_steps = 1;     // M
  double tau = 1e-2;       // inner lr
  double omega = 2e-3;     // outer lr
  double gamma1 = 1.0;
  double gamma2 = 0.5;
  double zeta = 1.0;
  std::size_t ft_batch = 32;
  std::size_t retain_batch = 64;
  MetaMode mode = MetaMode::kExact;
  // UCE / RECE branch: theta_init is a closed-form edit and the outer loop
  // takes meta-only steps.
  bool two_stage = false;
  // Drops the -L_ft(theta_FT) term of the meta loss.
  bool drop_forget_term = false;
  // Seed of the stream that draws finetune / retain batches and noise.
  std::uint64_t seed = 17;

  void validate() const;
};

nlohmann::json meta_config_to_json(const MetaConfig& c);
MetaConfig meta_config_from_json(const nlohmann::json& j, const MetaConfig& base = {});

// Scalar loss of a parameter vector; must be deterministic (frozen draws).
using LossFn = std::function<ad::Value(const ad::Value&)>;

// The two frozen losses one outer step works with.
struct MetaProblem {
  LossFn ft;      // L_ft on the sampled finetune batch
  LossFn retain;  // L_DM on the sampled retain batch
};

// M plain gradient steps of size tau on `loss`, starting at `theta`. With
// `create_graph` the unroll stays differentiable with respect to `theta`
// (requires a higher-order tape).
ad::Value inner_finetune(const ad::Tape& tape, const ad::Value& theta,
                         const LossFn& loss, int steps, double tau,
                         bool create_graph);

ad::Value meta_loss(const ad::Value& theta_ft, const ad::Value& theta,
                    const MetaProblem& problem, double zeta,
                    bool drop_forget_term = false);

// Which terms of the surrogate are active.
struct SurrogateTerms {
  bool loss = true;   // -L_ft(theta)
  bool norm = true;   // M tau |g_ft|^2
  bool inner = true;  // M tau zeta g_ft . g_r
};

ad::Value surrogate_loss(const ad::Tape& tape, const ad::Value& theta,
                         const MetaProblem& problem, int steps, double tau,
                         double zeta, const SurrogateTerms& terms = {});

struct MetaGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Value and gradient of L_meta(inner_finetune(theta), theta).
MetaGrad meta_grad_exact(const std::vector<double>& theta, const MetaProblem& problem,
                         int steps, double tau, double zeta,
                         bool drop_forget_term = false);
// Value of L_meta only.
double meta_loss_value(const std::vector<double>& theta, const MetaProblem& problem,
                       int steps, double tau, double zeta,
                       bool drop_forget_term = false);

// Value and gradient of the surrogate.
MetaGrad meta_grad_first_order(const std::vector<double>& theta,
                               const MetaProblem& problem, int steps, double tau,
                               double zeta, const SurrogateTerms& terms = {});

// Diffusion-loss problem over frozen batches and draws.
struct FrozenBatches {
  diffusion::Batch ft;
  diffusion::NoiseDraws ft_draws;
  diffusion::Batch retain;
  diffusion::NoiseDraws retain_draws;
};

FrozenBatches draw_frozen(const diffusion::Batch& ft_source,
                          const diffusion::Batch& retain_source,
                          std::size_t ft_batch, std::size_t retain_batch,
                          const diffusion::ModelConfig& model,
                          const diffusion::NoiseSchedule& schedule,
                          diffusion::Rng& rng);

MetaProblem make_problem(const diffusion::ModelConfig& model,
                         const diffusion::NoiseSchedule& schedule,
                         const FrozenBatches& batches);

// |g_ft|^2 and cos(g_ft, g_r) at theta.
struct GradStats {
  double grad_norm_sq_ft = 0.0;
  double cosine = 0.0;
};
GradStats grad_stats(const std::vector<double>& theta, const MetaProblem& problem);

// Meta gradient per `config.mode`.
MetaGrad meta_grad(const std::vector<double>& theta, const MetaProblem& problem,
                   const MetaConfig& config);

struct MetaResult {
  diffusion::DenoiserParams params;
  std::vector<MetaStepRecord> records;
};

// Observer for each applied update (the total step g, and its parts).
struct StepParts {
  int step = 0;
  const std::vector<double>* g_unlearn = nullptr;  // null in the two-stage branch
  const std::vector<double>* g_meta = nullptr;     // null when gamma2 == 0
  const std::vector<double>* g_total = nullptr;
};
using StepObserver = std::function<void(const StepParts&)>;

// Outer loop. `rng` drives the unlearning objective exactly as run_unlearn
// would; the meta batches come from a stream seeded with config.seed.
MetaResult meta_unlearn(const diffusion::DenoiserParams& theta_init,
                        const MetaConfig& config,
                        const unlearn::UnlearnConfig& unlearn_config,
                        const diffusion::DenoiserParams& theta_star,
                        const concepts::DatasetBundle& bundle,
                        const concepts::ConceptTable& table,
                        const diffusion::NoiseSchedule& schedule, diffusion::Rng& rng,
                        const StepObserver& observer = {});

}  // namespace metaunlearn::meta

#endif  // METAUNLEARN_META_META_H_
