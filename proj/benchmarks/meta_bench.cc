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

#include "metaunlearn/concepts/world.h"
#include "metaunlearn/diffusion/diffusion.h"
#include "metaunlearn/meta/meta.h"

namespace metaunlearn {
namespace {

struct Fixture {
  diffusion::ModelConfig mc;
  diffusion::NoiseSchedule schedule = diffusion::default_schedule();
  meta::FrozenBatches batches;
  std::vector<double> theta;

  Fixture() {
    const auto table = concepts::default_world(1);
    const auto bundle = concepts::draw_split(table, {256, 256, 8, 8}, 2);
    diffusion::Rng rng(3);
    batches = meta::draw_frozen(concepts::make_batch(table, bundle.forget, mc),
                                concepts::make_batch(table, bundle.retain, mc), 32, 64, mc,
                                schedule, rng);
    theta = diffusion::DenoiserParams::random(mc, 4).flat();
  }
};

void BM_MetaGradExact(benchmark::State& state) {
  const Fixture f;
  const auto problem = meta::make_problem(f.mc, f.schedule, f.batches);
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(meta::meta_grad_exact(f.theta, problem, steps, 1e-2, 1.0));
  }
}
BENCHMARK(BM_MetaGradExact)->Arg(1)->Arg(3);

void BM_MetaGradFirstOrder(benchmark::State& state) {
  const Fixture f;
  const auto problem = meta::make_problem(f.mc, f.schedule, f.batches);
  for (auto _ : state) {
    benchmark::DoNotOptimize(meta::meta_grad_first_order(f.theta, problem, 1, 1e-2, 1.0));
  }
}
BENCHMARK(BM_MetaGradFirstOrder);

}  // namespace
}  // namespace metaunlearn

BENCHMARK_MAIN();
