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

// Synthetic concept world: Gaussian concepts in data space, each with a unit
// embedding vector. The default world has one forget concept F, a related
// retained concept R that overlaps F both spatially and in embedding space,
// and two unrelated retained concepts U1, U2.

#ifndef METAUNLEARN_CONCEPTS_WORLD_H_
#define METAUNLEARN_CONCEPTS_WORLD_H_

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/diffusion/model.h"

namespace metaunlearn::concepts {

enum class ConceptRole { kForget, kRelatedRetain, kUnrelatedRetain };

std::string to_string(ConceptRole role);
ConceptRole parse_role(const std::string& name);

struct Concept {
  std::string name;
  std::vector<double> center;
  double spread = 0.3;
  std::vector<double> embedding;
  ConceptRole role = ConceptRole::kUnrelatedRetain;

  bool operator==(const Concept&) const = default;
};

class ConceptTable {
 public:
  ConceptTable() = default;
  ConceptTable(std::vector<Concept> concepts, int data_dim, int cond_dim);

  int data_dim() const { return data_dim_; }
  int cond_dim() const { return cond_dim_; }
  // Ordered by name.
  const std::map<std::string, Concept>& concepts() const { return concepts_; }
  bool contains(const std::string& name) const;
  // Throws InvalidArgument for unknown names.
  const Concept& at(const std::string& name) const;
  std::vector<std::string> names_with_role(ConceptRole role) const;
  // The single forget concept.
  const Concept& forget() const;
  // T(empty prompt): all zeros.
  std::vector<double> null_embedding() const;
  // Embedding of the second token in two-token models.
  const std::vector<double>& style_embedding() const { return style_; }
  void set_style_embedding(std::vector<double> style);

  bool operator==(const ConceptTable&) const = default;

 private:
  std::map<std::string, Concept> concepts_;
  int data_dim_ = 2;
  int cond_dim_ = 8;
  std::vector<double> style_;
};

struct ConceptSpec {
  std::string name;
  std::vector<double> center;
  double spread = 0.3;
  ConceptRole role = ConceptRole::kUnrelatedRetain;
};

struct WorldConfig {
  std::vector<ConceptSpec> concepts = {
      {"F", {2.0, 2.0}, 0.3, ConceptRole::kForget},
      {"R", {2.5, 2.5}, 0.3, ConceptRole::kRelatedRetain},
      {"U1", {-2.0, 2.0}, 0.3, ConceptRole::kUnrelatedRetain},
      {"U2", {-2.0, -2.0}, 0.3, ConceptRole::kUnrelatedRetain},
  };
  int cond_dim = 8;
  // Cosine between the forget embedding and every related embedding.
  double related_cos = 0.6;
  // Unrelated embeddings are resampled until |cos| with F is below this.
  double unrelated_max_cos = 0.8;
};

void validate(const WorldConfig& config);
ConceptTable make_world(const WorldConfig& config, std::uint64_t seed);
ConceptTable default_world(std::uint64_t seed);

double cosine(std::span<const double> a, std::span<const double> b);

// Labeled points: x is [n, data_dim], labels[i] names the concept of row i.
struct Samples {
  ad::Value x;
  std::vector<std::string> labels;
  std::size_t size() const { return labels.size(); }
};

struct SplitSizes {
  std::size_t forget = 1000;              // D_forget, from F
  std::size_t retain_per_concept = 1000;  // D_retain, from each retained concept
  std::size_t ft_pool = 256;              // fresh F draws for finetuning
  std::size_t benign_per_concept = 256;   // fresh unrelated draws
};

struct DatasetBundle {
  Samples forget;
  Samples retain;
  Samples ft_pool;
  Samples benign;
};

// `n` Gaussian draws from one concept. Unknown names throw InvalidArgument.
Samples draw_concept(const ConceptTable& table, const std::string& name,
                     std::size_t n, diffusion::Rng& rng);
Samples concat_samples(const Samples& a, const Samples& b);

DatasetBundle draw_split(const ConceptTable& table, const SplitSizes& sizes,
                         std::uint64_t seed);

// Closest concept center; ties go to the lexicographically smallest name.
const std::string& nearest_concept(const ConceptTable& table,
                                   std::span<const double> x);

// `count` unit vectors near the forget embedding: normalize(e_F + scale * z).
std::vector<std::vector<double>> paraphrase_embeddings(const ConceptTable& table,
                                                       std::size_t count,
                                                       double scale,
                                                       std::uint64_t seed);

// Condition tokens for one embedding: [num_tokens, cond_dim]. Token 0 carries
// `embedding`; further tokens carry the style embedding. The null condition
// is all zeros in every token.
std::vector<double> condition_tokens(const ConceptTable& table,
                                     std::span<const double> embedding,
                                     const diffusion::ModelConfig& model);
std::vector<double> null_condition(const ConceptTable& table,
                                   const diffusion::ModelConfig& model);
// Shape [num_tokens, cond_dim] condition for a named concept.
ad::Value concept_condition(const ConceptTable& table, const std::string& name,
                            const diffusion::ModelConfig& model);

// Training batch: each row conditioned on its label's embedding.
diffusion::Batch make_batch(const ConceptTable& table, const Samples& samples,
                            const diffusion::ModelConfig& model);
// Same points, every row conditioned on `embedding`.
diffusion::Batch make_batch_with(const ConceptTable& table, const ad::Value& x,
                                 std::span<const double> embedding,
                                 const diffusion::ModelConfig& model);

nlohmann::json world_config_to_json(const WorldConfig& config);
// Keys absent from `j` keep the values of `base`.
WorldConfig world_config_from_json(const nlohmann::json& j,
                                   const WorldConfig& base = {});
nlohmann::json table_to_json(const ConceptTable& table);
ConceptTable table_from_json(const nlohmann::json& j);
nlohmann::json samples_to_json(const Samples& samples);
Samples samples_from_json(const nlohmann::json& j);
nlohmann::json bundle_to_json(const DatasetBundle& bundle);
DatasetBundle bundle_from_json(const nlohmann::json& j);

}  // namespace metaunlearn::concepts

#endif  // METAUNLEARN_CONCEPTS_WORLD_H_
