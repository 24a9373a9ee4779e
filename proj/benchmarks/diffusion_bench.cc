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


#include <benchmark/benchmark.h>

#include "metaunlearn/autodiff/tape.h"
#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/diffusion.h"

namespace metaunlearn {
namespace {

void BM_DiffusionLossGradient(benchmark::State& state) {
  const diffusion::ModelConfig mc;
  const auto table = concepts::default_world(1);
  const auto bundle = concepts::draw_split(table, {256, 64, 8, 8}, 2);
  diffusion::Rng sample_rng(3);
  const auto batch = diffusion::sample_rows(concepts::make_batch(table, bundle.forget, mc),
                                            static_cast<std::size_t>(state.range(0)),
                                            sample_rng);
  const auto schedule = diffusion::default_schedule();
  diffusion::Rng rng(4);
  const auto draws = diffusion::draw_noise(batch.size(), mc.data_dim, schedule, rng);
  const ad::Value theta0 = diffusion::DenoiserParams::random(mc, 5).as_value();
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Value theta = tape.leaf(theta0);
    benchmark::DoNotOptimize(
        tape.grad(diffusion::diffusion_loss(mc, theta, batch, schedule, draws), theta, false));
  }
}
BENCHMARK(BM_DiffusionLossGradient)->Arg(32)->Arg(128);

void BM_Sample(benchmark::State& state) {
  const diffusion::ModelConfig mc;
  const auto table = concepts::default_world(1);
  const ad::Value theta = diffusion::DenoiserParams::random(mc, 5).as_value();
  const ad::Value cond = concepts::concept_condition(table, "F", mc);
  const auto schedule = diffusion::default_schedule();
  diffusion::Rng rng(6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffusion::sample(mc, theta, cond, schedule, rng,
                                               static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_Sample)->Arg(500);

}  // namespace
}  // namespace metaunlearn
