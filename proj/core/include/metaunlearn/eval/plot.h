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


#ifndef METAUNLEARN_EVAL_PLOT_H_
#define METAUNLEARN_EVAL_PLOT_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metaunlearn/attack/attack.h"
#include "metaunlearn/eval/metrics.h"
#include "metaunlearn/meta/records.h"

namespace metaunlearn::eval {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  // Fixed y range; derived from the data when unset.
  std::optional<std::pair<double, double>> y_range;
};

// Renders a line chart as a standalone SVG document.
std::string plot(const PlotSpec& spec);

// Forget score against attack step, one line per labelled curve.
std::string plot_forget_curves(
    std::span<const std::pair<std::string, attack::RelearnCurve>> curves);

// Normalised inner product per outer step with its OLS line.
std::string plot_alignment(std::span<const meta::MetaStepRecord> records);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace metaunlearn::eval

#endif  // METAUNLEARN_EVAL_PLOT_H_
