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

// Conditional noise-prediction network.
//
//   h0  = act(W_in x_t + W_t0 temb(t) + b_in)
//   q   = W_q h0,  K_j = W_k e_j,  V_j = W_v e_j      (one per condition token)
//   a   = softmax_j(q . K_j / sqrt(k))
//   h1  = h0 + sum_j a_j V_j
//   h2  = act(W_1 h1 + W_t1 temb(t) + b_1)
//   h3  = act(W_2 h2 + b_2)
//   eps = W_out h3 + b_out
//
// All weights live in one flat parameter vector; `param_layout` names the
// segments. The null condition (all-zero embedding) yields K = V = 0, so the
// network falls back to its unconditional trunk.

#ifndef METAUNLEARN_DIFFUSION_MODEL_H_
#define METAUNLEARN_DIFFUSION_MODEL_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metaunlearn/autodiff/tape.h"

namespace metaunlearn::diffusion {

enum class Activation { kSilu, kRelu };

struct ModelConfig {
  int data_dim = 2;
  int hidden = 32;
  int time_embed_dim = 16;
  int cond_dim = 8;
  int num_tokens = 1;
  Activation activation = Activation::kSilu;

  // Throws InvalidArgument when a dimension is not positive.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Parameter-group tags used by masks: "trunk", "time_embed", "attn", "head".
struct Segment {
  std::string name;
  std::string group;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
};

std::vector<Segment> param_layout(const ModelConfig& config);

inline constexpr std::size_t kMaxParams = 20000;

// Flat parameter vector plus named views into it.
class DenoiserParams {
 public:
  explicit DenoiserParams(ModelConfig config);
  // Scaled-normal initialisation (1/sqrt(fan_in)); biases start at zero.
  static DenoiserParams random(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& find(std::string_view name) const;

  std::vector<double>& flat() { return flat_; }
  const std::vector<double>& flat() const { return flat_; }
  std::size_t size() const { return flat_.size(); }

  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::string_view name) const;

  ad::Value as_value() const { return ad::Value::vector(flat_); }

  bool operator==(const DenoiserParams& other) const {
    return config_ == other.config_ && flat_ == other.flat_;
  }

 private:
  ModelConfig config_;
  std::vector<Segment> segments_;
  std::vector<double> flat_;
};

// Sinusoidal embedding of integer timesteps, shape [B, dim].
ad::Value timestep_embedding(std::span<const int> t, int dim);

struct Prediction {
  ad::Value eps;        // [B, data_dim]
  ad::Value attention;  // [B, num_tokens]
};

// `theta` is the flat parameter vector (possibly on a tape); `x_t` is
// [B, data_dim]; `cond` is [B, num_tokens, cond_dim] or, with one token,
// [B, cond_dim].
Prediction predict_noise_traced(const ModelConfig& config,
                                const ad::Value& theta, const ad::Value& x_t,
                                std::span<const int> t, const ad::Value& cond);

ad::Value predict_noise(const ModelConfig& config, const ad::Value& theta,
                        const ad::Value& x_t, std::span<const int> t,
                        const ad::Value& cond);

}  // namespace metaunlearn::diffusion

#endif  // METAUNLEARN_DIFFUSION_MODEL_H_
