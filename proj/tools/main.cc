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


#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli/commands.h"
#include "cli/experiment.h"
#include "metaunlearn/common/errors.h"

extern char** environ;

namespace {

using metaunlearn::cli::ExperimentConfig;
using nlohmann::json;
namespace cli = metaunlearn::cli;

struct Options {
  std::vector<std::string> configs;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::string out;
  int jobs = 1;
  bool force = false;
};

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw metaunlearn::ConfigError(path, "cannot open config file");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw metaunlearn::ConfigError(path, "not a JSON object");
  }
  if (j.value("schema", std::string()) != cli::kExperimentSchema) {
    throw metaunlearn::ConfigError(path + ":schema",
                                   std::string("expected '") +
                                       cli::kExperimentSchema + "'");
  }
  if (!j.contains("version") || j.at("version") != cli::kExperimentVersion) {
    throw metaunlearn::ConfigError(path + ":version",
                                   "unsupported experiment config version");
  }
  return j;
}

ExperimentConfig build_config(const std::string& config_path,
                              const std::vector<std::string>& overrides,
                              const std::uint64_t* seed, const std::string& out) {
  json tree = cli::experiment_to_json(ExperimentConfig{});
  if (!config_path.empty()) tree.merge_patch(read_config_file(config_path));
  for (const auto& o : overrides) cli::apply_override(tree, o);
  if (seed) tree["seed"] = *seed;
  if (!out.empty()) tree["out"] = out;
  return cli::experiment_from_json(tree);
}

int run_command(const std::string& name, const ExperimentConfig& config,
                const cli::CommandOptions& options) {
  if (name == "pretrain") return cli::cmd_pretrain(config, options);
  if (name == "unlearn") return cli::cmd_unlearn(config, options);
  if (name == "meta") return cli::cmd_meta(config, options);
  if (name == "attack") return cli::cmd_attack(config, options);
  if (name == "eval") return cli::cmd_eval(config, options);
  if (name == "report") return cli::cmd_report(config, options);
  if (name == "pipeline") {
    for (auto* stage : {cli::cmd_pretrain, cli::cmd_unlearn, cli::cmd_meta,
                        cli::cmd_attack, cli::cmd_eval}) {
      if (int rc = stage(config, options); rc != cli::kExitOk) return rc;
    }
    return cli::cmd_report(config, options);
  }
  throw std::logic_error("unknown command " + name);
}

// Runs `command` in-process, mapping error types to exit codes.
int guarded(const std::function<int()>& command) {
  try {
    return command();
  } catch (const metaunlearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitConfig;
  } catch (const cli::MissingInput& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return cli::kExitConfig;
  } catch (const metaunlearn::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return cli::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFailure;
  }
}

struct Job {
  std::string config;
  const std::uint64_t* seed = nullptr;
};

int spawn_and_wait(const std::string& command, const std::vector<Job>& jobs,
                   const Options& opt) {
  std::vector<pid_t> running;
  int worst = cli::kExitOk;
  auto reap_one = [&] {
    int status = 0;
    pid_t pid = ::wait(&status);
    if (pid < 0) return;
    running.erase(std::remove(running.begin(), running.end(), pid), running.end());
    int rc = WIFEXITED(status) ? WEXITSTATUS(status) : cli::kExitFailure;
    worst = std::max(worst, rc);
  };
  for (const Job& job : jobs) {
    while (static_cast<int>(running.size()) >= opt.jobs) reap_one();
    std::vector<std::string> args = {"/proc/self/exe", command};
    if (!job.config.empty()) args.insert(args.end(), {"--config", job.config});
    for (const auto& o : opt.overrides) args.insert(args.end(), {"--set", o});
    if (job.seed) args.insert(args.end(), {"--seed", std::to_string(*job.seed)});
    if (!opt.out.empty()) args.insert(args.end(), {"--out", opt.out});
    if (opt.force) args.push_back("--force");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (::posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, argv.data(),
                      environ) != 0) {
      std::cerr << "error: failed to spawn job\n";
      worst = std::max(worst, static_cast<int>(cli::kExitFailure));
      continue;
    }
    running.push_back(pid);
  }
  while (!running.empty()) reap_one();
  return worst;
}

int dispatch(const std::string& command, const Options& opt) {
  std::vector<Job> jobs;
  std::vector<std::string> configs = opt.configs;
  if (configs.empty()) configs.emplace_back();
  for (const auto& c : configs) {
    if (opt.seeds.empty()) {
      jobs.push_back({c, nullptr});
    } else {
      for (const auto& s : opt.seeds) jobs.push_back({c, &s});
    }
  }
  if (jobs.size() > 1) return spawn_and_wait(command, jobs, opt);
  return guarded([&] {
    ExperimentConfig config =
        build_config(jobs[0].config, opt.overrides, jobs[0].seed, opt.out);
    cli::CommandOptions options;
    options.force = opt.force;
    return run_command(command, config, options);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-unlearning experiments on toy conditional diffusion models"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"pretrain", "Train theta* on every concept"},
      {"unlearn", "Run the configured unlearning method"},
      {"meta", "Run meta-unlearning"},
      {"attack", "Finetune the unlearn and meta checkpoints"},
      {"eval", "Score every available checkpoint"},
      {"report", "Compare attack curves and render plots"},
      {"pipeline", "Run every stage in order"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.configs, "Experiment config (JSON); repeatable");
    sub->add_option("--set", opt.overrides, "Override dotted.key=value; repeatable");
    sub->add_option("--seed", opt.seeds, "Root seed; repeat to fan out runs");
    sub->add_option("--jobs", opt.jobs, "Concurrent processes for fan-out")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "Output directory root");
    sub->add_flag("--force", opt.force, "Recompute even if the manifest verifies");
    sub->callback([&chosen, name = name] { chosen = name; });
  }
  app.add_subcommand("verify", "Run finite-difference and oracle checks")
      ->callback([&chosen] { chosen = "verify"; });
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kExitConfig;
  }
  if (chosen == "verify") return guarded([] { return cli::cmd_verify(std::cout); });
  return dispatch(chosen, opt);
}
