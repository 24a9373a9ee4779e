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

#include <random>

#include "metaunlearn/autodiff/ops.h"
#include "metaunlearn/autodiff/tape.h"

namespace metaunlearn {
namespace {

ad::Value random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ad::Buffer data(rows * cols);
  for (double& v : data) v = g(rng);
  return ad::Value({rows, cols}, std::move(data));
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ad::Value a = random_matrix(n, n, 1);
  const ad::Value b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
}
BENCHMARK(BM_MatmulForward)->Arg(32)->Arg(128);

void BM_MlpGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ad::Value x = random_matrix(128, n, 3);
  const ad::Value w0 = random_matrix(n, n, 4);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Value w = tape.leaf(w0);
    const ad::Value loss = ad::mean(ad::square(ad::silu(ad::matmul(x, w))));
    benchmark::DoNotOptimize(tape.grad(loss, w, false));
  }
}
BENCHMARK(BM_MlpGradient)->Arg(32)->Arg(64);

void BM_MlpHvp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ad::Value x = random_matrix(128, n, 5);
  const ad::Value w0 = random_matrix(n, n, 6);
  const ad::Value v = random_matrix(n, n, 7);
  for (auto _ : state) {
    ad::Tape tape(true);
    const ad::Value w = tape.leaf(w0);
    const ad::Value loss = ad::mean(ad::square(ad::silu(ad::matmul(x, w))));
    benchmark::DoNotOptimize(tape.hvp(loss, w, v));
  }
}
BENCHMARK(BM_MlpHvp)->Arg(32);

}  // namespace
}  // namespace metaunlearn
