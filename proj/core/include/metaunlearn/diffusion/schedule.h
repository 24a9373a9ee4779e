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

#ifndef METAUNLEARN_DIFFUSION_SCHEDULE_H_
#define METAUNLEARN_DIFFUSION_SCHEDULE_H_

#include <span>
#include <vector>

namespace metaunlearn::diffusion {

// Discrete variance schedule. Timesteps are 1-based: t in [1, steps].
struct NoiseSchedule {
  int steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta;       // beta[t-1]
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // running product of alpha
  std::vector<double> sigma;      // sampler noise scale, sqrt(beta)

  double beta_at(int t) const { return beta[index(t)]; }
  double alpha_at(int t) const { return alpha[index(t)]; }
  double alpha_bar_at(int t) const { return alpha_bar[index(t)]; }
  double sigma_at(int t) const { return sigma[index(t)]; }

 private:
  std::size_t index(int t) const;
};

// Linearly spaced betas; requires steps >= 1 and
// 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

// Default toy schedule: 100 steps, betas 1e-3 -> 0.2.
NoiseSchedule default_schedule();

// x_t = sqrt(alpha_bar_t) x + sqrt(1 - alpha_bar_t) eps.
std::vector<double> forward_diffuse(std::span<const double> x, int t,
                                    std::span<const double> eps,
                                    const NoiseSchedule& schedule);

}  // namespace metaunlearn::diffusion

#endif  // METAUNLEARN_DIFFUSION_SCHEDULE_H_
