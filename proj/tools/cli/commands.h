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


#ifndef METAUNLEARN_TOOLS_CLI_COMMANDS_H_
#define METAUNLEARN_TOOLS_CLI_COMMANDS_H_

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "cli/experiment.h"
#include "cli/manifest.h"
#include "metaunlearn/attack/attack.h"

namespace metaunlearn::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitVerdict = 4,
};

// An upstream artifact a stage depends on is absent or fails verification.
class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOptions {
  bool force = false;  // recompute even when the manifest entry verifies
  std::ostream* log = nullptr;
};

inline constexpr const char* kStagePretrain = "pretrain";
inline constexpr const char* kStageUnlearn = "unlearn";
inline constexpr const char* kStageMeta = "meta";
inline constexpr const char* kStageAttack = "attack";
inline constexpr const char* kStageEval = "eval";
inline constexpr const char* kStageReport = "report";

// out/<config-hash>
std::filesystem::path run_root(const ExperimentConfig& config);

int cmd_pretrain(const ExperimentConfig& config, const CommandOptions& options = {});
int cmd_unlearn(const ExperimentConfig& config, const CommandOptions& options = {});
int cmd_meta(const ExperimentConfig& config, const CommandOptions& options = {});
int cmd_attack(const ExperimentConfig& config, const CommandOptions& options = {});
int cmd_eval(const ExperimentConfig& config, const CommandOptions& options = {});
// Returns kExitVerdict when the meta curve does not relearn slower.
int cmd_report(const ExperimentConfig& config, const CommandOptions& options = {});
// Runs the finite-difference and closed-form oracle suites.
int cmd_verify(std::ostream& out);

// Comparison grid, one row per attack step; deltas are meta minus unlearn.
std::string report_grid_csv(const attack::RelearnCurve& unlearn,
                            const attack::RelearnCurve& meta);

}  // namespace metaunlearn::cli

#endif  // METAUNLEARN_TOOLS_CLI_COMMANDS_H_
