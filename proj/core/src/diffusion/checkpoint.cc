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

#include "metaunlearn/diffusion/checkpoint.h"

#include <fstream>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::diffusion {

using nlohmann::json;

json model_config_to_json(const ModelConfig& c) {
  return json{{"data_dim", c.data_dim},
              {"hidden", c.hidden},
              {"time_embed_dim", c.time_embed_dim},
              {"cond_dim", c.cond_dim},
              {"num_tokens", c.num_tokens},
              {"activation", to_string(c.activation)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.data_dim = j.value("data_dim", c.data_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
  c.cond_dim = j.value("cond_dim", c.cond_dim);
  c.num_tokens = j.value("num_tokens", c.num_tokens);
  c.activation = parse_activation(j.value("activation", std::string("silu")));
  c.validate();
  return c;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["schema"] = kCheckpointSchema;
  j["version"] = kCheckpointVersion;
  j["model"] = model_config_to_json(ckpt.params.config());
  j["schedule"] = {{"steps", ckpt.schedule_steps},
                   {"beta_start", ckpt.beta_start},
                   {"beta_end", ckpt.beta_end}};
  j["params"] = ckpt.params.flat();
  j["seed_lineage"] = ckpt.seed_lineage;
  j["provenance"] = ckpt.provenance;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("schema", std::string()) != kCheckpointSchema) {
    throw InvalidArgument("checkpoint: unexpected schema");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw InvalidArgument("checkpoint: unsupported version");
  }
  Checkpoint ckpt;
  ckpt.params = DenoiserParams(model_config_from_json(j.at("model")));
  const auto flat = j.at("params").get<std::vector<double>>();
  if (flat.size() != ckpt.params.size()) {
    throw InvalidArgument("checkpoint: parameter count " +
                          std::to_string(flat.size()) + " does not match model (" +
                          std::to_string(ckpt.params.size()) + ")");
  }
  ckpt.params.flat() = flat;
  const json& s = j.at("schedule");
  ckpt.schedule_steps = s.at("steps").get<int>();
  ckpt.beta_start = s.at("beta_start").get<double>();
  ckpt.beta_end = s.at("beta_end").get<double>();
  ckpt.seed_lineage = j.value("seed_lineage", std::vector<std::uint64_t>{});
  ckpt.provenance = j.value("provenance", json::object());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return checkpoint_from_json(json::parse(in));
}

}  // namespace metaunlearn::diffusion
