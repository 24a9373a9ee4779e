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

// Finetuning attacks on a released checkpoint and their comparison.

#ifndef METAUNLEARN_ATTACK_ATTACK_H_
#define METAUNLEARN_ATTACK_ATTACK_H_

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/diffusion/model.h"
#include "metaunlearn/optim/optimizer.h"

namespace metaunlearn::attack {

enum class AttackData { kFtSingle, kFtMulti, kBenign };

std::string to_string(AttackData d);
AttackData parse_attack_data(const std::string& name);

struct AttackConfig {
  AttackData dataset = AttackData::kFtSingle;
  optim::OptimizerKind optimizer = optim::OptimizerKind::kSgd;
  double lr = 1e-3;
  std::vector<int> checkpoints = {0, 50, 100, 200, 300};
  std::size_t batch_size = 32;
  std::uint64_t seed = 11;
  // Paraphrase embeddings for ft_multi.
  std::size_t paraphrases = 5;
  double paraphrase_scale = 0.15;
  // Evaluation at each checkpoint; the seed is fixed across checkpoints.
  std::size_t score_samples = 500;
  std::size_t mmd_samples = 300;
  std::size_t loss_samples = 512;
  std::uint64_t eval_seed = 23;

  void validate() const;
};

nlohmann::json attack_config_to_json(const AttackConfig& c);
AttackConfig attack_config_from_json(const nlohmann::json& j,
                                     const AttackConfig& base = {});

struct CurvePoint {
  int step = 0;
  double forget_score = 0.0;
  double l_forget = 0.0;
  double l_retain = 0.0;
  // Mean retain MMD over the unrelated retained concepts.
  double retain_mmd = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct RelearnCurve {
  std::vector<CurvePoint> points;
  // Set when the attack diverged; points stop at the last finite checkpoint.
  bool failed = false;
  std::string failure;
};

struct AttackResult {
  RelearnCurve curve;
  std::vector<diffusion::DenoiserParams> snapshots;
};

// Metrics of one parameter vector, as recorded at each checkpoint.
CurvePoint evaluate_point(const diffusion::DenoiserParams& params, int step,
                          const AttackConfig& config,
                          const concepts::DatasetBundle& bundle,
                          const concepts::ConceptTable& table,
                          const diffusion::NoiseSchedule& schedule);

// Finetuning data for the chosen attack.
diffusion::Batch attack_data(const AttackConfig& config,
                             const concepts::DatasetBundle& bundle,
                             const concepts::ConceptTable& table,
                             const diffusion::ModelConfig& model);

AttackResult run_attack(const diffusion::DenoiserParams& released,
                        const AttackConfig& config,
                        const concepts::DatasetBundle& bundle,
                        const concepts::ConceptTable& table,
                        const diffusion::NoiseSchedule& schedule,
                        bool keep_snapshots = true);

struct StepDelta {
  int step = 0;
  double forget_score = 0.0;
  double l_forget = 0.0;
  double l_retain = 0.0;
  double retain_mmd = 0.0;
};

// `a` is the baseline (plain unlearning), `b` the candidate (meta-unlearning).
struct Verdict {
  std::vector<StepDelta> deltas;  // b - a
  // (i) b's forget score <= a's at every step.
  bool slower_relearning = false;
  int steps_not_worse = 0;
  // (ii) at matched forget-loss levels, b's retain loss exceeds a's.
  bool self_destruct = false;
  int matched_levels = 0;
  // (iii) forget scores differ by less than `band` at every step.
  bool within_band = false;
  double band = 10.0;
};

// Throws InvalidArgument when the step schedules differ.
Verdict compare_runs(const RelearnCurve& a, const RelearnCurve& b, double band = 10.0);

// l_retain at the first point whose l_forget is below `threshold`, or at the
// last point when no point crosses it.
double retain_at_forget_threshold(const RelearnCurve& curve, double threshold);

inline constexpr const char* kCurveHeader =
    "step,forget_score,l_forget,l_retain,retain_mmd";

void write_curve_csv(const std::filesystem::path& path, const RelearnCurve& curve);
RelearnCurve read_curve_csv(const std::filesystem::path& path);

nlohmann::json verdict_to_json(const Verdict& v);

}  // namespace metaunlearn::attack

#endif  // METAUNLEARN_ATTACK_ATTACK_H_
