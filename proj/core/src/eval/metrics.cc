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

#include "metaunlearn/eval/metrics.h"

#include <algorithm>
#include <cmath>

#include "metaunlearn/common/errors.h"
#include "metaunlearn/diffusion/diffusion.h"

namespace metaunlearn::eval {

using ad::Value;

namespace {

Value sample_concept(const ModelView& model, const concepts::ConceptTable& table,
                     const std::string& concept_name, std::size_t n,
                     diffusion::Rng& rng) {
  const Value cond = concepts::concept_condition(table, concept_name, model.config);
  return diffusion::sample(model.config, model.theta, cond, model.schedule, rng, n);
}

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

}  // namespace

double percent_classified(const concepts::ConceptTable& table, const Value& x,
                          const std::string& concept_name) {
  table.at(concept_name);
  if (x.rank() != 2 || x.shape()[0] == 0) {
    throw InvalidArgument("percent_classified: expected a nonempty [n, d] sample");
  }
  const std::size_t n = x.shape()[0];
  const std::size_t d = x.shape()[1];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.data().subspan(i * d, d);
    if (concepts::nearest_concept(table, row) == concept_name) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

double concept_score(const ModelView& model, const concepts::ConceptTable& table,
                     const std::string& concept_name, std::size_t n,
                     std::uint64_t seed) {
  if (n < 100) throw InvalidArgument("concept_score: n must be >= 100");
  table.at(concept_name);
  diffusion::Rng rng(seed);
  return percent_classified(table, sample_concept(model, table, concept_name, n, rng),
                            concept_name);
}

double forget_score(const ModelView& model, const concepts::ConceptTable& table,
                    std::size_t n, std::uint64_t seed) {
  return concept_score(model, table, table.forget().name, n, seed);
}

double mmd_unbiased(const Value& x, const Value& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.shape()[1] != y.shape()[1]) {
    throw InvalidArgument("mmd: inputs must be [n, d] with matching d");
  }
  const std::size_t n = x.shape()[0], m = y.shape()[0], d = x.shape()[1];
  if (n < 2 || m < 2) throw InvalidArgument("mmd: each set needs at least 2 points");
  const double* px = x.data().data();
  const double* py = y.data().data();
  auto row = [&](std::size_t i) { return i < n ? px + i * d : py + (i - n) * d; };

  const std::size_t total = n + m;
  std::vector<double> dists;
  dists.reserve(total * (total - 1) / 2);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      dists.push_back(std::sqrt(sq_dist(row(i), row(j), d)));
    }
  }
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double bandwidth = *mid;
  if (!(bandwidth > 0.0)) bandwidth = 1.0;
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  auto k = [&](const double* a, const double* b) {
    return std::exp(-sq_dist(a, b, d) * inv);
  };

  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) kxx += k(px + i * d, px + j * d);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) kyy += k(py + i * d, py + j * d);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) kxy += k(px + i * d, py + j * d);
  }
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  return 2.0 * kxx / (dn * (dn - 1.0)) + 2.0 * kyy / (dm * (dm - 1.0)) -
         2.0 * kxy / (dn * dm);
}

double retain_mmd(const ModelView& model, const concepts::ConceptTable& table,
                  const std::string& concept_name, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("retain_mmd: n must be >= 2");
  if (table.at(concept_name).role == concepts::ConceptRole::kForget) {
    throw InvalidArgument("retain_mmd: '" + concept_name + "' is not a retained concept");
  }
  diffusion::Rng rng(seed);
  const Value generated = sample_concept(model, table, concept_name, n, rng);
  diffusion::Rng truth_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const concepts::Samples truth = concepts::draw_concept(table, concept_name, n, truth_rng);
  return mmd_unbiased(generated, truth.x);
}

LineFit ols_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("ols: length mismatch");
  if (xs.size() < 2) throw InvalidArgument("ols: need at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("ols: x values are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

LineFit alignment_series(std::span<const meta::MetaStepRecord> records) {
  if (records.size() < 2) {
    throw InvalidArgument("alignment_series: need at least 2 records");
  }
  std::vector<double> xs, ys;
  for (const auto& r : records) {
    xs.push_back(static_cast<double>(r.step));
    ys.push_back(r.inner_product_norm);
  }
  return ols_fit(xs, ys);
}

MetricReport evaluate(const ModelView& model, const concepts::ConceptTable& table,
                      const EvalConfig& config) {
  MetricReport r;
  r.forget_score = forget_score(model, table, config.score_samples, config.seed);
  const auto related = table.names_with_role(concepts::ConceptRole::kRelatedRetain);
  if (!related.empty()) {
    r.related_score = concept_score(model, table, related.front(),
                                    config.score_samples, config.seed + 1);
  }
  std::uint64_t offset = 2;
  for (const auto& [name, c] : table.concepts()) {
    if (c.role == concepts::ConceptRole::kForget) continue;
    r.retain_mmd[name] =
        retain_mmd(model, table, name, config.mmd_samples, config.seed + offset++);
  }
  return r;
}

nlohmann::json report_to_json(const MetricReport& report) {
  nlohmann::json j{{"forget_score", report.forget_score},
                   {"related_score", report.related_score},
                   {"retain_mmd", report.retain_mmd}};
  if (report.alignment) {
    j["alignment"] = {{"slope", report.alignment->slope},
                      {"intercept", report.alignment->intercept}};
  }
  return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.forget_score = j.at("forget_score").get<double>();
  r.related_score = j.at("related_score").get<double>();
  r.retain_mmd = j.at("retain_mmd").get<std::map<std::string, double>>();
  if (j.contains("alignment")) {
    r.alignment = LineFit{j["alignment"].at("slope").get<double>(),
                          j["alignment"].at("intercept").get<double>()};
  }
  return r;
}

}  // namespace metaunlearn::eval
