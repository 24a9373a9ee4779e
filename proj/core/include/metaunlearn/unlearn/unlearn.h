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

// Baseline unlearning methods: ESD and SDD (gradient based) and UCE / RECE
// (closed-form edits of the cross-attention key and value matrices).

#ifndef METAUNLEARN_UNLEARN_UNLEARN_H_
#define METAUNLEARN_UNLEARN_UNLEARN_H_

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/diffusion/model.h"
#include "metaunlearn/optim/optimizer.h"
#include "metaunlearn/unlearn/closed_form.h"

namespace metaunlearn::unlearn {

enum class Method { kEsd, kSdd, kUce, kRece };

std::string to_string(Method m);
Method parse_method(const std::string& name);
bool is_closed_form(Method m);

// Per-segment inclusion flags over a parameter layout.
class ParamMask {
 public:
  // Presets: "full", "esd_x" (cross-attention only), "esd_u" (everything
  // except cross-attention).
  static ParamMask preset(const std::string& name,
                          const diffusion::ModelConfig& config);
  static ParamMask from_groups(const std::vector<std::string>& groups,
                               const diffusion::ModelConfig& config);

  bool includes(const std::string& segment) const;
  const std::vector<diffusion::Segment>& segments() const { return segments_; }
  // Zeroes gradient entries of excluded segments.
  void apply(std::vector<double>& grad) const;
  bool is_full() const;

 private:
  std::vector<diffusion::Segment> segments_;
  std::vector<bool> include_;
};

struct UnlearnConfig {
  Method method = Method::kEsd;
  double eta = 1.0;           // ESD guidance scale
  std::string mask = "esd_u";
  int steps = 1000;
  double lr = 2e-3;
  optim::OptimizerKind optimizer = optim::OptimizerKind::kSgd;
  std::size_t batch_size = 64;
  double ema_decay = 0.999;   // SDD teacher
  double lambda = 0.0;        // weight of L_DM on D_retain
  double lambda1 = 1.0;       // UCE retain weight
  double lambda2 = 0.1;       // UCE ridge weight
  double lambda_rece = 0.1;
  int rece_iters = 3;
  // Diffuse samples drawn from the frozen model rather than data samples.
  bool xt_from_model = false;
  std::size_t model_pool = 1000;

  void validate() const;
};

nlohmann::json unlearn_config_to_json(const UnlearnConfig& c);
UnlearnConfig unlearn_config_from_json(const nlohmann::json& j,
                                       const UnlearnConfig& base = {});

ad::Value esd_target(const ad::Value& eps_c, const ad::Value& eps_null, double eta);

// Mean over the batch of |eps_theta(x_t, c) - target|^2, where the target is
// esd_target of the frozen model's conditional and null predictions.
ad::Value esd_loss(const diffusion::ModelConfig& config, const ad::Value& theta,
                   const ad::Value& theta_star, const diffusion::Batch& batch,
                   double eta, const diffusion::NoiseSchedule& schedule,
                   const diffusion::NoiseDraws& draws);

// Mean over the batch of |eps_theta(x_t, c) - sg(eps_teacher(x_t, null))|^2.
ad::Value sdd_loss(const diffusion::ModelConfig& config, const ad::Value& theta,
                   const ad::Value& teacher, const diffusion::Batch& batch,
                   const diffusion::NoiseSchedule& schedule,
                   const diffusion::NoiseDraws& draws);

// mu * teacher + (1 - mu) * student.
void ema_update(std::vector<double>& teacher, const std::vector<double>& student,
                double mu);

// Weight blocks edited by the closed-form methods.
inline const std::vector<std::string>& edited_segments() {
  static const std::vector<std::string> names = {"attn.k", "attn.v"};
  return names;
}
std::vector<Mat> attention_matrices(const diffusion::DenoiserParams& params);
void set_attention_matrices(diffusion::DenoiserParams& params,
                            const std::vector<Mat>& mats);

// The gradient-based unlearning objective at a moving parameter vector. One
// call to `loss_grad` draws its own batch and noise from `rng`; `after_step`
// advances the SDD teacher.
class UnlearnObjective {
 public:
  UnlearnObjective(const diffusion::DenoiserParams& theta_star,
                   const UnlearnConfig& config,
                   const concepts::DatasetBundle& bundle,
                   const concepts::ConceptTable& table,
                   const diffusion::NoiseSchedule& schedule, diffusion::Rng& rng);

  diffusion::LossAndGrad loss_grad(const std::vector<double>& theta,
                                   diffusion::Rng& rng) const;
  void after_step(const std::vector<double>& theta);

  const diffusion::Batch& forget_data() const { return forget_; }

 private:
  diffusion::ModelConfig model_;
  UnlearnConfig config_;
  const diffusion::NoiseSchedule& schedule_;
  ad::Value theta_star_;
  std::vector<double> teacher_;
  diffusion::Batch forget_;
  diffusion::Batch retain_;
};

struct UnlearnResult {
  diffusion::DenoiserParams params;
  std::vector<double> losses;
  // RECE only: constructed embeddings.
  std::vector<Embedding> rece_embeddings;
};

// Closed-form edit of theta* for UCE / RECE.
UnlearnResult closed_form_unlearn(const diffusion::DenoiserParams& theta_star,
                                  const UnlearnConfig& config,
                                  const concepts::ConceptTable& table);

UnlearnResult run_unlearn(const diffusion::DenoiserParams& theta_star,
                          const UnlearnConfig& config,
                          const concepts::DatasetBundle& bundle,
                          const concepts::ConceptTable& table,
                          const diffusion::NoiseSchedule& schedule,
                          diffusion::Rng& rng);

}  // namespace metaunlearn::unlearn

#endif  // METAUNLEARN_UNLEARN_UNLEARN_H_
