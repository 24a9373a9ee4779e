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


#include "cli/experiment.h"

#include <algorithm>
#include <fstream>

#include "cli/manifest.h"
#include "metaunlearn/common/errors.h"
#include "metaunlearn/diffusion/checkpoint.h"

namespace metaunlearn::cli {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json split_to_json(const concepts::SplitSizes& s) {
  return {{"forget", s.forget},
          {"retain_per_concept", s.retain_per_concept},
          {"ft_pool", s.ft_pool},
          {"benign_per_concept", s.benign_per_concept}};
}

concepts::SplitSizes split_from_json(const json& j) {
  concepts::SplitSizes s;
  s.forget = j.value("forget", s.forget);
  s.retain_per_concept = j.value("retain_per_concept", s.retain_per_concept);
  s.ft_pool = j.value("ft_pool", s.ft_pool);
  s.benign_per_concept = j.value("benign_per_concept", s.benign_per_concept);
  return s;
}

json train_to_json(const diffusion::TrainConfig& c) {
  return {{"steps", c.steps},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"null_prob", c.null_prob},
          {"optimizer", optim::to_string(c.optimizer)}};
}

diffusion::TrainConfig train_from_json(const json& j) {
  diffusion::TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.null_prob = j.value("null_prob", c.null_prob);
  c.optimizer = optim::parse_optimizer(
      j.value("optimizer", optim::to_string(c.optimizer)));
  return c;
}

json eval_to_json(const eval::EvalConfig& c) {
  return {{"score_samples", c.score_samples},
          {"mmd_samples", c.mmd_samples},
          {"seed", c.seed}};
}

eval::EvalConfig eval_from_json(const json& j) {
  eval::EvalConfig c;
  c.score_samples = j.value("score_samples", c.score_samples);
  c.mmd_samples = j.value("mmd_samples", c.mmd_samples);
  c.seed = j.value("seed", c.seed);
  return c;
}

// Every object key of `j` must exist in `reference`; arrays are not descended.
void check_keys(const json& j, const json& reference, const std::string& path) {
  if (!j.is_object()) return;
  if (!reference.is_object()) {
    throw ConfigError(path, "expected a scalar or array, found an object");
  }
  for (const auto& [key, value] : j.items()) {
    std::string child = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError(child, "unknown key");
    check_keys(value, reference.at(key), child);
  }
}

// Prefixes `block` unless the error path already starts with it.
ConfigError scoped(const std::string& block, const ConfigError& e) {
  const std::string& p = e.path();
  if (p == block || p.rfind(block + ".", 0) == 0) return e;
  std::string message = e.what();
  message = message.substr(std::min(message.size(), p.size() + 2));
  return ConfigError(p.empty() ? block : block + "." + p, message);
}

template <typename F>
auto parse_block(const json& j, const std::string& name, F&& parse) {
  const json& block = j.contains(name) ? j.at(name) : json::object();
  try {
    return parse(block);
  } catch (const ConfigError& e) {
    throw scoped(name, e);
  } catch (const json::exception& e) {
    throw ConfigError(name, e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(name, e.what());
  }
}

template <typename F>
void check(const std::string& path, F&& validate) {
  try {
    validate();
  } catch (const ConfigError& e) {
    throw scoped(path, e);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  check("world", [&] { concepts::validate(world); });
  if (split.forget == 0 || split.retain_per_concept == 0 || split.ft_pool == 0 ||
      split.benign_per_concept == 0) {
    throw ConfigError("world.split", "all split sizes must be positive");
  }
  check("model", [&] { model.validate(); });
  if (model.cond_dim != world.cond_dim) {
    throw ConfigError("model.cond_dim", "must equal world.cond_dim");
  }
  if (model.data_dim != static_cast<int>(world.concepts.front().center.size())) {
    throw ConfigError("model.data_dim", "must equal the concept center dimension");
  }
  check("schedule", [&] {
    diffusion::make_schedule(schedule.steps, schedule.beta_start,
                             schedule.beta_end);
  });
  if (pretrain.steps < 0) throw ConfigError("pretrain.steps", "must be >= 0");
  if (!(pretrain.lr > 0.0)) throw ConfigError("pretrain.lr", "must be positive");
  if (pretrain.batch_size == 0) {
    throw ConfigError("pretrain.batch_size", "must be positive");
  }
  if (!(pretrain.null_prob >= 0.0 && pretrain.null_prob < 1.0)) {
    throw ConfigError("pretrain.null_prob", "must lie in [0, 1)");
  }
  check("unlearn", [&] { unlearn.validate(); });
  check("meta", [&] { meta.validate(); });
  if (meta.two_stage != unlearn::is_closed_form(unlearn.method)) {
    throw ConfigError("meta.two_stage",
                      "must be true exactly when unlearn.method is uce or rece");
  }
  check("attack", [&] { attack.validate(); });
  if (eval.score_samples < 100) {
    throw ConfigError("eval.score_samples", "must be >= 100");
  }
  if (eval.mmd_samples < 2) throw ConfigError("eval.mmd_samples", "must be >= 2");
  if (out.empty()) throw ConfigError("out", "must not be empty");
}

std::uint64_t stage_seed(const ExperimentConfig& config, Stage stage) {
  return splitmix64(config.seed * 0x100000001b3ULL +
                    static_cast<std::uint64_t>(stage));
}

json experiment_to_json(const ExperimentConfig& c) {
  json world = concepts::world_config_to_json(c.world);
  world["split"] = split_to_json(c.split);
  return {{"schema", kExperimentSchema},
          {"version", kExperimentVersion},
          {"seed", c.seed},
          {"world", world},
          {"model", diffusion::model_config_to_json(c.model)},
          {"schedule",
           {{"steps", c.schedule.steps},
            {"beta_start", c.schedule.beta_start},
            {"beta_end", c.schedule.beta_end}}},
          {"pretrain", train_to_json(c.pretrain)},
          {"unlearn", unlearn::unlearn_config_to_json(c.unlearn)},
          {"meta", meta::meta_config_to_json(c.meta)},
          {"attack", attack::attack_config_to_json(c.attack)},
          {"eval", eval_to_json(c.eval)},
          {"out", c.out}};
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "experiment config must be an object");
  if (j.value("schema", std::string()) != kExperimentSchema) {
    throw ConfigError("schema", std::string("expected '") + kExperimentSchema + "'");
  }
  if (!j.contains("version") || !j.at("version").is_number_integer() ||
      j.at("version").get<int>() != kExperimentVersion) {
    throw ConfigError("version", "unsupported experiment config version");
  }
  check_keys(j, experiment_to_json(ExperimentConfig{}), "");

  ExperimentConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
  } catch (const json::exception& e) {
    throw ConfigError("seed", e.what());
  }
  c.world = parse_block(j, "world", [](const json& b) {
    json w = b;
    w.erase("split");
    return concepts::world_config_from_json(w);
  });
  c.split = parse_block(j, "world", [](const json& b) {
    return split_from_json(b.contains("split") ? b.at("split") : json::object());
  });
  c.model = parse_block(j, "model", diffusion::model_config_from_json);
  c.schedule = parse_block(j, "schedule", [](const json& b) {
    ScheduleConfig s;
    s.steps = b.value("steps", s.steps);
    s.beta_start = b.value("beta_start", s.beta_start);
    s.beta_end = b.value("beta_end", s.beta_end);
    return s;
  });
  c.pretrain = parse_block(j, "pretrain", train_from_json);
  c.unlearn = parse_block(j, "unlearn", [](const json& b) {
    return unlearn::unlearn_config_from_json(b);
  });
  c.meta = parse_block(j, "meta", [](const json& b) {
    return meta::meta_config_from_json(b);
  });
  c.attack = parse_block(j, "attack", [](const json& b) {
    return attack::attack_config_from_json(b);
  });
  c.eval = parse_block(j, "eval", eval_from_json);
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
  return experiment_from_json(j);
}

void apply_override(json& tree, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like dotted.key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = key.find('.', start);
    std::string part = key.substr(start, dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError(key, "unknown key");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  *node = value;
}

std::string config_hash(const ExperimentConfig& config) {
  json j = experiment_to_json(config);
  j.erase("out");
  return sha1_hex(j.dump());
}

}  // namespace metaunlearn::cli
