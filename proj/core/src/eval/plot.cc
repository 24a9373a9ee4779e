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


#include "metaunlearn/eval/plot.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "metaunlearn/common/errors.h"

namespace metaunlearn::eval {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(lo < hi)) {
    double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    return {lo - pad, hi + pad};
  }
  double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

}  // namespace

std::string plot(const PlotSpec& spec) {
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  for (const Series& s : spec.series) {
    if (s.xs.size() != s.ys.size()) {
      throw InvalidArgument("plot: series '" + s.label +
                            "' has mismatched x/y lengths");
    }
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      x_lo = std::min(x_lo, s.xs[i]);
      x_hi = std::max(x_hi, s.xs[i]);
      y_lo = std::min(y_lo, s.ys[i]);
      y_hi = std::max(y_hi, s.ys[i]);
    }
  }
  if (!std::isfinite(x_lo)) {
    x_lo = 0.0;
    x_hi = 1.0;
    y_lo = 0.0;
    y_hi = 1.0;
  }
  if (spec.y_range) {
    y_lo = spec.y_range->first;
    y_hi = spec.y_range->second;
  } else {
    std::tie(y_lo, y_hi) = padded(y_lo, y_hi);
  }
  if (!(x_lo < x_hi)) std::tie(x_lo, x_hi) = padded(x_lo, x_hi);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) {
    return kTop + ph - (y - y_lo) / (y_hi - y_lo) * ph;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth)
     << "\" height=\"" << num(kHeight) << "\" font-family=\"sans-serif\" "
     << "font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" "
     << "text-anchor=\"middle\" font-size=\"14\">" << escape(spec.title)
     << "</text>\n";
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
     << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fx = x_lo + (x_hi - x_lo) * i / 4.0;
    double fy = y_lo + (y_hi - y_lo) * i / 4.0;
    os << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(kTop + ph + 16)
       << "\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(fy) + 4)
       << "\" text-anchor=\"end\">" << num(fy) << "</text>\n";
    os << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft + pw)
       << "\" y1=\"" << num(py(fy)) << "\" y2=\"" << num(py(fy))
       << "\" stroke=\"#dddddd\"/>\n";
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(kTop + ph / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num(kTop + ph / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const Series& s = spec.series[k];
    const char* color = kColors[k % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"";
    if (s.dashed) os << " stroke-dasharray=\"6 4\"";
    os << " points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      os << num(px(s.xs[i])) << ',' << num(py(s.ys[i])) << ' ';
    }
    os << "\"/>\n";
    double ly = kTop + 14 + 18 * static_cast<double>(k);
    os << "<line x1=\"" << num(kLeft + pw + 10) << "\" x2=\""
       << num(kLeft + pw + 30) << "\" y1=\"" << num(ly) << "\" y2=\""
       << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(kLeft + pw + 35) << "\" y=\"" << num(ly + 4)
       << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string plot_forget_curves(
    std::span<const std::pair<std::string, attack::RelearnCurve>> curves) {
  PlotSpec spec{"Forget-concept score under attack", "attack step",
                "forget score (%)", {}, std::make_pair(0.0, 100.0)};
  for (const auto& [label, curve] : curves) {
    Series s{label, {}, {}, false};
    for (const attack::CurvePoint& p : curve.points) {
      s.xs.push_back(p.step);
      s.ys.push_back(p.forget_score);
    }
    spec.series.push_back(std::move(s));
  }
  return plot(spec);
}

std::string plot_alignment(std::span<const meta::MetaStepRecord> records) {
  PlotSpec spec{"Forget/retain gradient alignment", "outer step",
                "normalised inner product", {}, std::nullopt};
  Series data{"cosine", {}, {}, false};
  for (const meta::MetaStepRecord& r : records) {
    data.xs.push_back(r.step);
    data.ys.push_back(r.inner_product_norm);
  }
  spec.series.push_back(data);
  if (records.size() >= 2) {
    LineFit fit = alignment_series(records);
    Series line{"OLS fit", {}, {}, true};
    for (double x : {data.xs.front(), data.xs.back()}) {
      line.xs.push_back(x);
      line.ys.push_back(fit.intercept + fit.slope * x);
    }
    spec.series.push_back(std::move(line));
  }
  return plot(spec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw InvalidArgument("failed writing '" + path.string() + "'");
}

}  // namespace metaunlearn::eval
