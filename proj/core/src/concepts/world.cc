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

#include "metaunlearn/concepts/world.h"

#include <cmath>
#include <limits>
#include <random>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::concepts {

using ad::Shape;
using ad::Value;
using nlohmann::json;

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> random_unit(int dim, diffusion::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim));
  double n = 0.0;
  while (n < 1e-8) {
    for (double& x : v) x = normal(rng);
    n = norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

std::string to_string(ConceptRole role) {
  switch (role) {
    case ConceptRole::kForget:
      return "forget";
    case ConceptRole::kRelatedRetain:
      return "related_retain";
    case ConceptRole::kUnrelatedRetain:
      return "unrelated_retain";
  }
  return "unknown";
}

ConceptRole parse_role(const std::string& name) {
  if (name == "forget") return ConceptRole::kForget;
  if (name == "related_retain") return ConceptRole::kRelatedRetain;
  if (name == "unrelated_retain") return ConceptRole::kUnrelatedRetain;
  throw InvalidArgument("unknown concept role '" + name + "'");
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine: length mismatch");
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
  return ab / (norm(a) * norm(b));
}

ConceptTable::ConceptTable(std::vector<Concept> concepts, int data_dim,
                           int cond_dim)
    : data_dim_(data_dim), cond_dim_(cond_dim) {
  if (concepts.empty()) throw InvalidArgument("ConceptTable: no concepts");
  for (Concept& c : concepts) {
    if (c.center.size() != static_cast<std::size_t>(data_dim)) {
      throw InvalidArgument("concept '" + c.name + "': center has wrong dimension");
    }
    if (c.embedding.size() != static_cast<std::size_t>(cond_dim)) {
      throw InvalidArgument("concept '" + c.name +
                            "': embedding has wrong dimension");
    }
    if (!(c.spread > 0.0)) {
      throw InvalidArgument("concept '" + c.name + "': spread must be positive");
    }
    std::string name = c.name;
    if (!concepts_.emplace(name, std::move(c)).second) {
      throw InvalidArgument("duplicate concept name '" + name + "'");
    }
  }
  style_.assign(static_cast<std::size_t>(cond_dim), 0.0);
}

bool ConceptTable::contains(const std::string& name) const {
  return concepts_.count(name) != 0;
}

const Concept& ConceptTable::at(const std::string& name) const {
  auto it = concepts_.find(name);
  if (it == concepts_.end()) {
    throw InvalidArgument("unknown concept '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> ConceptTable::names_with_role(ConceptRole role) const {
  std::vector<std::string> out;
  for (const auto& [name, c] : concepts_) {
    if (c.role == role) out.push_back(name);
  }
  return out;
}

const Concept& ConceptTable::forget() const {
  const auto names = names_with_role(ConceptRole::kForget);
  if (names.size() != 1) {
    throw InvalidArgument("world must contain exactly one forget concept, found " +
                          std::to_string(names.size()));
  }
  return at(names.front());
}

std::vector<double> ConceptTable::null_embedding() const {
  return std::vector<double>(static_cast<std::size_t>(cond_dim_), 0.0);
}

void ConceptTable::set_style_embedding(std::vector<double> style) {
  if (style.size() != static_cast<std::size_t>(cond_dim_)) {
    throw InvalidArgument("style embedding has wrong dimension");
  }
  style_ = std::move(style);
}

void validate(const WorldConfig& config) {
  if (config.concepts.empty()) throw ConfigError("world.concepts", "empty");
  if (config.cond_dim < 2) throw ConfigError("world.cond_dim", "must be >= 2");
  if (!(std::abs(config.related_cos) < 1.0)) {
    throw ConfigError("world.related_cos", "must be in (-1, 1)");
  }
  if (!(config.unrelated_max_cos > 0.0 && config.unrelated_max_cos <= 1.0)) {
    throw ConfigError("world.unrelated_max_cos", "must be in (0, 1]");
  }
  const std::size_t dim = config.concepts.front().center.size();
  int forget = 0;
  for (const ConceptSpec& s : config.concepts) {
    if (s.center.size() != dim || dim == 0) {
      throw ConfigError("world.concepts." + s.name + ".center",
                        "all centers must share one positive dimension");
    }
    if (!(s.spread > 0.0)) {
      throw ConfigError("world.concepts." + s.name + ".spread", "must be positive");
    }
    if (s.role == ConceptRole::kForget) ++forget;
  }
  if (forget != 1) {
    throw ConfigError("world.concepts", "exactly one concept must have role forget");
  }
}

ConceptTable make_world(const WorldConfig& config, std::uint64_t seed) {
  validate(config);
  diffusion::Rng rng(seed);
  const int k = config.cond_dim;
  std::vector<double> e_f;
  for (const ConceptSpec& s : config.concepts) {
    if (s.role == ConceptRole::kForget) e_f = random_unit(k, rng);
  }
  const double a = config.related_cos;
  const double b = std::sqrt(1.0 - a * a);
  std::vector<Concept> concepts;
  for (const ConceptSpec& s : config.concepts) {
    Concept c{s.name, s.center, s.spread, {}, s.role};
    if (s.role == ConceptRole::kForget) {
      c.embedding = e_f;
    } else if (s.role == ConceptRole::kRelatedRetain) {
      // w: a fresh unit vector orthogonal to e_F, so cos(e_F, e_R) == a.
      std::vector<double> w;
      double n = 0.0;
      while (n < 1e-6) {
        w = random_unit(k, rng);
        double proj = 0.0;
        for (int i = 0; i < k; ++i) proj += w[i] * e_f[i];
        for (int i = 0; i < k; ++i) w[i] -= proj * e_f[i];
        n = norm(w);
      }
      for (double& x : w) x /= n;
      c.embedding.resize(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) c.embedding[i] = a * e_f[i] + b * w[i];
      const double en = norm(c.embedding);
      for (double& x : c.embedding) x /= en;
    } else {
      do {
        c.embedding = random_unit(k, rng);
      } while (std::abs(cosine(c.embedding, e_f)) >= config.unrelated_max_cos);
    }
    concepts.push_back(std::move(c));
  }
  ConceptTable table(std::move(concepts),
                     static_cast<int>(config.concepts.front().center.size()), k);
  table.set_style_embedding(random_unit(k, rng));
  return table;
}

ConceptTable default_world(std::uint64_t seed) {
  return make_world(WorldConfig{}, seed);
}

Samples draw_concept(const ConceptTable& table, const std::string& name,
                     std::size_t n, diffusion::Rng& rng) {
  const Concept& c = table.at(name);
  const std::size_t d = c.center.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  ad::Buffer x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      x[i * d + j] = c.center[j] + c.spread * normal(rng);
    }
  }
  return Samples{Value(Shape{n, d}, std::move(x)),
                 std::vector<std::string>(n, name)};
}

Samples concat_samples(const Samples& a, const Samples& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.x.shape()[1] != b.x.shape()[1]) {
    throw InvalidArgument("concat_samples: dimension mismatch");
  }
  ad::Buffer x = a.x.to_vector();
  const auto bx = b.x.data();
  x.insert(x.end(), bx.begin(), bx.end());
  std::vector<std::string> labels = a.labels;
  labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  return Samples{Value(Shape{a.size() + b.size(), a.x.shape()[1]}, std::move(x)),
                 std::move(labels)};
}

DatasetBundle draw_split(const ConceptTable& table, const SplitSizes& sizes,
                         std::uint64_t seed) {
  if (sizes.forget == 0 || sizes.retain_per_concept == 0 || sizes.ft_pool == 0 ||
      sizes.benign_per_concept == 0) {
    throw InvalidArgument("draw_split: every split size must be positive");
  }
  diffusion::Rng rng(seed);
  const std::string forget = table.forget().name;
  DatasetBundle b;
  b.forget = draw_concept(table, forget, sizes.forget, rng);
  for (const auto& [name, c] : table.concepts()) {
    if (c.role == ConceptRole::kForget) continue;
    b.retain = concat_samples(
        b.retain, draw_concept(table, name, sizes.retain_per_concept, rng));
  }
  b.ft_pool = draw_concept(table, forget, sizes.ft_pool, rng);
  for (const std::string& name : table.names_with_role(ConceptRole::kUnrelatedRetain)) {
    b.benign = concat_samples(
        b.benign, draw_concept(table, name, sizes.benign_per_concept, rng));
  }
  if (b.benign.size() == 0) {
    throw InvalidArgument("draw_split: world has no unrelated concepts for benign data");
  }
  return b;
}

const std::string& nearest_concept(const ConceptTable& table,
                                   std::span<const double> x) {
  if (table.concepts().empty()) throw InvalidArgument("nearest_concept: empty table");
  const std::string* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  // std::map iterates in name order, so strict < keeps the smallest name.
  for (const auto& [name, c] : table.concepts()) {
    double d = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - c.center[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = &name;
    }
  }
  return *best;
}

std::vector<std::vector<double>> paraphrase_embeddings(const ConceptTable& table,
                                                       std::size_t count,
                                                       double scale,
                                                       std::uint64_t seed) {
  diffusion::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<double>& e_f = table.forget().embedding;
  std::vector<std::vector<double>> out;
  for (std::size_t p = 0; p < count; ++p) {
    std::vector<double> e(e_f);
    for (double& x : e) x += scale * normal(rng);
    const double n = norm(e);
    for (double& x : e) x /= n;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<double> condition_tokens(const ConceptTable& table,
                                     std::span<const double> embedding,
                                     const diffusion::ModelConfig& model) {
  const auto k = static_cast<std::size_t>(model.cond_dim);
  if (model.cond_dim != table.cond_dim() || embedding.size() != k) {
    throw InvalidArgument("condition: embedding dimension does not match the model");
  }
  std::vector<double> out(embedding.begin(), embedding.end());
  for (int t = 1; t < model.num_tokens; ++t) {
    out.insert(out.end(), table.style_embedding().begin(),
               table.style_embedding().end());
  }
  return out;
}

std::vector<double> null_condition(const ConceptTable& table,
                                   const diffusion::ModelConfig& model) {
  if (model.cond_dim != table.cond_dim()) {
    throw InvalidArgument("condition: embedding dimension does not match the model");
  }
  return std::vector<double>(
      static_cast<std::size_t>(model.cond_dim * model.num_tokens), 0.0);
}

Value concept_condition(const ConceptTable& table, const std::string& name,
                        const diffusion::ModelConfig& model) {
  return Value(Shape{static_cast<std::size_t>(model.num_tokens),
                     static_cast<std::size_t>(model.cond_dim)},
               condition_tokens(table, table.at(name).embedding, model));
}

diffusion::Batch make_batch(const ConceptTable& table, const Samples& samples,
                            const diffusion::ModelConfig& model) {
  const std::size_t n = samples.size();
  const auto tokens = static_cast<std::size_t>(model.num_tokens);
  const auto k = static_cast<std::size_t>(model.cond_dim);
  std::map<std::string, std::vector<double>> cache;
  ad::Buffer cond;
  cond.reserve(n * tokens * k);
  for (const std::string& label : samples.labels) {
    auto it = cache.find(label);
    if (it == cache.end()) {
      it = cache.emplace(label, condition_tokens(table, table.at(label).embedding,
                                                 model)).first;
    }
    cond.insert(cond.end(), it->second.begin(), it->second.end());
  }
  return diffusion::Batch{samples.x, Value(Shape{n, tokens, k}, std::move(cond))};
}

diffusion::Batch make_batch_with(const ConceptTable& table, const Value& x,
                                 std::span<const double> embedding,
                                 const diffusion::ModelConfig& model) {
  const std::size_t n = x.shape()[0];
  const std::vector<double> one = condition_tokens(table, embedding, model);
  ad::Buffer cond;
  cond.reserve(n * one.size());
  for (std::size_t i = 0; i < n; ++i) cond.insert(cond.end(), one.begin(), one.end());
  return diffusion::Batch{
      x, Value(Shape{n, static_cast<std::size_t>(model.num_tokens),
                     static_cast<std::size_t>(model.cond_dim)},
               std::move(cond))};
}

json world_config_to_json(const WorldConfig& config) {
  json concepts = json::array();
  for (const ConceptSpec& s : config.concepts) {
    concepts.push_back({{"name", s.name},
                        {"center", s.center},
                        {"spread", s.spread},
                        {"role", to_string(s.role)}});
  }
  return json{{"concepts", concepts},
              {"cond_dim", config.cond_dim},
              {"related_cos", config.related_cos},
              {"unrelated_max_cos", config.unrelated_max_cos}};
}

WorldConfig world_config_from_json(const json& j, const WorldConfig& base) {
  WorldConfig c = base;
  try {
    if (j.contains("concepts")) {
      c.concepts.clear();
      for (const json& s : j.at("concepts")) {
        c.concepts.push_back(ConceptSpec{
            s.at("name").get<std::string>(),
            s.at("center").get<std::vector<double>>(), s.value("spread", 0.3),
            parse_role(s.value("role", std::string("unrelated_retain")))});
      }
    }
    c.cond_dim = j.value("cond_dim", c.cond_dim);
    c.related_cos = j.value("related_cos", c.related_cos);
    c.unrelated_max_cos = j.value("unrelated_max_cos", c.unrelated_max_cos);
  } catch (const json::exception& e) {
    throw ConfigError("world", e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError("world.concepts", e.what());
  }
  validate(c);
  return c;
}

json table_to_json(const ConceptTable& table) {
  json concepts = json::array();
  for (const auto& [name, c] : table.concepts()) {
    concepts.push_back({{"name", name},
                        {"center", c.center},
                        {"spread", c.spread},
                        {"embedding", c.embedding},
                        {"role", to_string(c.role)}});
  }
  return json{{"schema", "metaunlearn.world"},
              {"version", 1},
              {"data_dim", table.data_dim()},
              {"cond_dim", table.cond_dim()},
              {"style_embedding", table.style_embedding()},
              {"concepts", concepts}};
}

ConceptTable table_from_json(const json& j) {
  if (j.value("schema", std::string()) != "metaunlearn.world") {
    throw InvalidArgument("world: unexpected schema");
  }
  std::vector<Concept> concepts;
  for (const json& c : j.at("concepts")) {
    concepts.push_back(Concept{c.at("name").get<std::string>(),
                               c.at("center").get<std::vector<double>>(),
                               c.at("spread").get<double>(),
                               c.at("embedding").get<std::vector<double>>(),
                               parse_role(c.at("role").get<std::string>())});
  }
  ConceptTable table(std::move(concepts), j.at("data_dim").get<int>(),
                     j.at("cond_dim").get<int>());
  table.set_style_embedding(j.at("style_embedding").get<std::vector<double>>());
  return table;
}

json samples_to_json(const Samples& s) {
  const std::size_t d = s.size() == 0 ? 0 : s.x.shape()[1];
  return json{{"dim", d}, {"labels", s.labels}, {"x", s.x.to_vector()}};
}

Samples samples_from_json(const json& j) {
  Samples s;
  s.labels = j.at("labels").get<std::vector<std::string>>();
  const auto d = j.at("dim").get<std::size_t>();
  auto x = j.at("x").get<std::vector<double>>();
  if (x.size() != s.labels.size() * d) {
    throw InvalidArgument("samples: point count does not match labels");
  }
  if (!s.labels.empty()) s.x = Value(Shape{s.labels.size(), d}, std::move(x));
  return s;
}

json bundle_to_json(const DatasetBundle& b) {
  return json{{"schema", "metaunlearn.bundle"},
              {"version", 1},
              {"forget", samples_to_json(b.forget)},
              {"retain", samples_to_json(b.retain)},
              {"ft_pool", samples_to_json(b.ft_pool)},
              {"benign", samples_to_json(b.benign)}};
}

DatasetBundle bundle_from_json(const json& j) {
  if (j.value("schema", std::string()) != "metaunlearn.bundle") {
    throw InvalidArgument("bundle: unexpected schema");
  }
  return DatasetBundle{samples_from_json(j.at("forget")),
                       samples_from_json(j.at("retain")),
                       samples_from_json(j.at("ft_pool")),
                       samples_from_json(j.at("benign"))};
}

}  // namespace metaunlearn::concepts
