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


#ifndef METAUNLEARN_TOOLS_CLI_EXPERIMENT_H_
#define METAUNLEARN_TOOLS_CLI_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaunlearn/attack/attack.h"
#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/diffusion/model.h"
#include "metaunlearn/eval/metrics.h"
#include "metaunlearn/meta/meta.h"
#include "metaunlearn/unlearn/unlearn.h"

namespace metaunlearn::cli {

inline constexpr const char* kExperimentSchema = "metaunlearn.experiment";
inline constexpr int kExperimentVersion = 1;

struct ScheduleConfig {
  int steps = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;
};

struct ExperimentConfig {
  // Root of every derived stage seed; see stage_seed().
  std::uint64_t seed = 1;
  concepts::WorldConfig world;
  concepts::SplitSizes split;
  diffusion::ModelConfig model;
  ScheduleConfig schedule;
  diffusion::TrainConfig pretrain;
  unlearn::UnlearnConfig unlearn;
  meta::MetaConfig meta;
  attack::AttackConfig attack;
  eval::EvalConfig eval;
  std::string out = "out";

  // Throws ConfigError with the dotted path of the first offending field.
  void validate() const;
};

enum class Stage { kWorld, kSplit, kInit, kPretrain, kUnlearn };

// Deterministic per-stage seed derived from `config.seed`.
std::uint64_t stage_seed(const ExperimentConfig& config, Stage stage);

nlohmann::json experiment_to_json(const ExperimentConfig& config);
// Rejects unknown keys, wrong types and schema mismatches with ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Applies `dotted.key=value` to a config tree. The value is parsed as JSON
// when possible and taken as a string otherwise. The key must already exist.
void apply_override(nlohmann::json& tree, const std::string& assignment);

// Hex SHA-1 of the canonical config tree without the output directory.
std::string config_hash(const ExperimentConfig& config);

}  // namespace metaunlearn::cli

#endif  // METAUNLEARN_TOOLS_CLI_EXPERIMENT_H_
