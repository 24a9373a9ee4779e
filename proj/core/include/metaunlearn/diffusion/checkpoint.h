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

// Checkpoint documents (JSON):
//
//   {
//     "schema": "metaunlearn.checkpoint", "version": 1,
//     "model": {ModelConfig fields},
//     "schedule": {"steps": T, "beta_start": .., "beta_end": ..},
//     "params": [flat parameter array],
//     "seed_lineage": [u64, ...],
//     "provenance": {...}             // free-form: method, config hash, ...
//   }
//
// Doubles are written in shortest round-trip form, so a save/load cycle
// reproduces every parameter exactly.

#ifndef METAUNLEARN_DIFFUSION_CHECKPOINT_H_
#define METAUNLEARN_DIFFUSION_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "metaunlearn/diffusion/model.h"
#include "metaunlearn/diffusion/schedule.h"

namespace metaunlearn::diffusion {

inline constexpr const char* kCheckpointSchema = "metaunlearn.checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  DenoiserParams params{ModelConfig{}};
  int schedule_steps = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  std::vector<std::uint64_t> seed_lineage;
  nlohmann::json provenance = nlohmann::json::object();

  NoiseSchedule schedule() const {
    return make_schedule(schedule_steps, beta_start, beta_end);
  }
};

nlohmann::json model_config_to_json(const ModelConfig& config);
// Missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace metaunlearn::diffusion

#endif  // METAUNLEARN_DIFFUSION_CHECKPOINT_H_
