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

// Sample-based metrics on the toy world.

#ifndef METAUNLEARN_EVAL_METRICS_H_
#define METAUNLEARN_EVAL_METRICS_H_

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/model.h"
#include "metaunlearn/diffusion/schedule.h"
#include "metaunlearn/meta/records.h"

namespace metaunlearn::eval {

// Everything needed to draw samples from a parameter vector.
struct ModelView {
  const diffusion::ModelConfig& config;
  const ad::Value& theta;
  const diffusion::NoiseSchedule& schedule;
};

// Percentage of the rows of `x` [n, d] whose nearest concept is `concept_name`.
double percent_classified(const concepts::ConceptTable& table, const ad::Value& x,
                          const std::string& concept_name);

// Percentage of `n` samples conditioned on `concept_name` whose nearest center is
// `concept_name`. n >= 100.
double concept_score(const ModelView& model, const concepts::ConceptTable& table,
                     const std::string& concept_name, std::size_t n,
                     std::uint64_t seed);
// concept_score for the forget concept.
double forget_score(const ModelView& model, const concepts::ConceptTable& table,
                    std::size_t n, std::uint64_t seed);

// Unbiased squared MMD with a Gaussian kernel whose bandwidth is the median
// pairwise distance of the pooled sample. Both sets need >= 2 rows.
double mmd_unbiased(const ad::Value& x, const ad::Value& y);

// MMD between `n` model samples conditioned on a retained concept and `n`
// fresh draws from that concept.
double retain_mmd(const ModelView& model, const concepts::ConceptTable& table,
                  const std::string& concept_name, std::size_t n, std::uint64_t seed);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares of ys against xs; needs >= 2 points and two
// distinct x values.
LineFit ols_fit(std::span<const double> xs, std::span<const double> ys);
// OLS of inner_product_norm against the step index.
LineFit alignment_series(std::span<const meta::MetaStepRecord> records);

struct MetricReport {
  double forget_score = 0.0;
  double related_score = 0.0;
  std::map<std::string, double> retain_mmd;
  std::optional<LineFit> alignment;
};

struct EvalConfig {
  std::size_t score_samples = 1000;
  std::size_t mmd_samples = 500;
  std::uint64_t seed = 7;
};

MetricReport evaluate(const ModelView& model, const concepts::ConceptTable& table,
                      const EvalConfig& config);

nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

}  // namespace metaunlearn::eval

#endif  // METAUNLEARN_EVAL_METRICS_H_
