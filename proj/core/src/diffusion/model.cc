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

#include "metaunlearn/diffusion/model.h"

#include <cmath>

#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/common/errors.h"

namespace metaunlearn::diffusion {

using ad::Shape;
using ad::Value;

void ModelConfig::validate() const {
  if (data_dim <= 0 || hidden <= 0 || time_embed_dim <= 0 || cond_dim <= 0 ||
      num_tokens <= 0) {
    throw InvalidArgument("ModelConfig: all dimensions must be positive");
  }
  if (time_embed_dim % 2 != 0) {
    throw InvalidArgument("ModelConfig: time_embed_dim must be even");
  }
}

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "silu";
}

Activation parse_activation(const std::string& name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "relu") return Activation::kRelu;
  throw InvalidArgument("unknown activation '" + name + "'");
}

std::vector<Segment> param_layout(const ModelConfig& c) {
  c.validate();
  const auto d = static_cast<std::size_t>(c.data_dim);
  const auto h = static_cast<std::size_t>(c.hidden);
  const auto e = static_cast<std::size_t>(c.time_embed_dim);
  const auto k = static_cast<std::size_t>(c.cond_dim);
  std::vector<Segment> segs = {
      {"trunk.in_w", "trunk", 0, h, d},   {"trunk.in_b", "trunk", 0, h, 1},
      {"time.w0", "time_embed", 0, h, e}, {"attn.q", "attn", 0, h, h},
      {"attn.k", "attn", 0, h, k},        {"attn.v", "attn", 0, h, k},
      {"trunk.w1", "trunk", 0, h, h},     {"time.w1", "time_embed", 0, h, e},
      {"trunk.b1", "trunk", 0, h, 1},     {"trunk.w2", "trunk", 0, h, h},
      {"trunk.b2", "trunk", 0, h, 1},     {"head.w", "head", 0, d, h},
      {"head.b", "head", 0, d, 1},
  };
  std::size_t offset = 0;
  for (Segment& s : segs) {
    s.offset = offset;
    offset += s.size();
  }
  if (offset > kMaxParams) {
    throw InvalidArgument("ModelConfig: " + std::to_string(offset) +
                          " parameters exceed the toy budget of " +
                          std::to_string(kMaxParams));
  }
  return segs;
}

DenoiserParams::DenoiserParams(ModelConfig config)
    : config_(config), segments_(param_layout(config)) {
  const Segment& last = segments_.back();
  flat_.assign(last.offset + last.size(), 0.0);
}

DenoiserParams DenoiserParams::random(ModelConfig config, std::uint64_t seed) {
  DenoiserParams p(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const Segment& s : p.segments_) {
    if (s.cols == 1) continue;  // bias
    const double std = 1.0 / std::sqrt(static_cast<double>(s.cols));
    for (std::size_t i = 0; i < s.size(); ++i) {
      p.flat_[s.offset + i] = std * normal(rng);
    }
  }
  return p;
}

const Segment& DenoiserParams::find(std::string_view name) const {
  for (const Segment& s : segments_) {
    if (s.name == name) return s;
  }
  throw InvalidArgument("unknown parameter segment '" + std::string(name) + "'");
}

std::span<double> DenoiserParams::segment(std::string_view name) {
  const Segment& s = find(name);
  return std::span<double>(flat_.data() + s.offset, s.size());
}

std::span<const double> DenoiserParams::segment(std::string_view name) const {
  const Segment& s = find(name);
  return std::span<const double>(flat_.data() + s.offset, s.size());
}

Value timestep_embedding(std::span<const int> t, int dim) {
  const std::size_t half = static_cast<std::size_t>(dim) / 2;
  ad::Buffer angles(t.size() * half);
  for (std::size_t b = 0; b < t.size(); ++b) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                   static_cast<double>(half));
      angles[b * half + i] = static_cast<double>(t[b]) * freq;
    }
  }
  Value a(Shape{t.size(), half}, std::move(angles));
  const Value parts[] = {ad::sin(a), ad::cos(a)};
  return ad::concat(parts, 1);
}

namespace {

class Weights {
 public:
  Weights(const Value& theta, const std::vector<Segment>& segs)
      : theta_(theta), segs_(segs) {}

  Value get(std::string_view name) const {
    for (const Segment& s : segs_) {
      if (s.name != name) continue;
      Value flat = ad::slice(theta_, 0, s.offset, s.size());
      if (s.cols == 1) return flat;
      return ad::reshape(flat, Shape{s.rows, s.cols});
    }
    throw InvalidArgument("unknown parameter segment '" + std::string(name) + "'");
  }

 private:
  const Value& theta_;
  const std::vector<Segment>& segs_;
};

Value activate(Activation a, const Value& x) {
  return a == Activation::kRelu ? ad::relu(x) : ad::silu(x);
}

// x W^T for a [B, in] batch and an [out, in] weight.
Value linear(const Value& x, const Value& w) { return ad::matmul(x, w, false, true); }

}  // namespace

Prediction predict_noise_traced(const ModelConfig& config, const Value& theta,
                                const Value& x_t, std::span<const int> t,
                                const Value& cond) {
  const std::vector<Segment> segs = param_layout(config);
  const Segment& last = segs.back();
  if (theta.rank() != 1 || theta.size() != last.offset + last.size()) {
    throw InvalidArgument("predict_noise: parameter vector has shape " +
                          ad::shape_string(theta.shape()) + ", expected [" +
                          std::to_string(last.offset + last.size()) + "]");
  }
  const auto d = static_cast<std::size_t>(config.data_dim);
  const auto h = static_cast<std::size_t>(config.hidden);
  const auto k = static_cast<std::size_t>(config.cond_dim);
  const auto n_tok = static_cast<std::size_t>(config.num_tokens);
  if (x_t.rank() != 2 || x_t.shape()[1] != d) {
    throw InvalidArgument("predict_noise: x_t must be [B, " + std::to_string(d) +
                          "], got " + ad::shape_string(x_t.shape()));
  }
  const std::size_t batch = x_t.shape()[0];
  if (t.size() != batch) {
    throw InvalidArgument("predict_noise: " + std::to_string(t.size()) +
                          " timesteps for a batch of " + std::to_string(batch));
  }
  const bool cond_ok =
      (cond.rank() == 3 && cond.shape() == Shape{batch, n_tok, k}) ||
      (cond.rank() == 2 && n_tok == 1 && cond.shape() == Shape{batch, k});
  if (!cond_ok) {
    throw InvalidArgument("predict_noise: condition has shape " +
                          ad::shape_string(cond.shape()) + ", expected [" +
                          std::to_string(batch) + ", " + std::to_string(n_tok) +
                          ", " + std::to_string(k) + "]");
  }

  Weights w(theta, segs);
  const Value temb = timestep_embedding(t, config.time_embed_dim);

  Value h0 = activate(config.activation,
                      linear(x_t, w.get("trunk.in_w")) +
                          linear(temb, w.get("time.w0")) + w.get("trunk.in_b"));

  // Cross-attention over the condition tokens.
  Value tokens = ad::reshape(cond, Shape{batch * n_tok, k});
  Value keys = ad::reshape(linear(tokens, w.get("attn.k")), Shape{batch, n_tok, h});
  Value values = ad::reshape(linear(tokens, w.get("attn.v")), Shape{batch, n_tok, h});
  Value query = ad::reshape(linear(h0, w.get("attn.q")), Shape{batch, 1, h});
  Value scores = ad::scale(ad::sum(query * keys, 2),
                           1.0 / std::sqrt(static_cast<double>(k)));
  Value attn = ad::softmax(scores);
  Value context =
      ad::sum(ad::reshape(attn, Shape{batch, n_tok, 1}) * values, 1);
  Value h1 = h0 + context;

  Value h2 = activate(config.activation,
                      linear(h1, w.get("trunk.w1")) +
                          linear(temb, w.get("time.w1")) + w.get("trunk.b1"));
  Value h3 = activate(config.activation,
                      linear(h2, w.get("trunk.w2")) + w.get("trunk.b2"));
  Value eps = linear(h3, w.get("head.w")) + w.get("head.b");
  return Prediction{eps, attn};
}

Value predict_noise(const ModelConfig& config, const Value& theta,
                    const Value& x_t, std::span<const int> t, const Value& cond) {
  return predict_noise_traced(config, theta, x_t, t, cond).eps;
}

}  // namespace metaunlearn::diffusion
