/* Copyright 2026 The skipdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <benchmark/benchmark.h>

#include <memory>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/parallel.hpp"
#include "skipdiff/sequential.hpp"

// Zero-latency mixture denoiser, so these measure orchestration cost:
// drafting, refinement and the worker-pool round trip.
namespace skipdiff {
namespace {

GaussianMixture bench_mixture() {
  return GaussianMixture{{0.3, 0.7}, {{-1.5, 0.5}, {1.0, -0.5}}, {0.3, 0.5}};
}

void BM_SequentialDdim(benchmark::State& state) {
  const auto s = default_schedule(50);
  const auto d = Denoiser::analytic(bench_mixture());
  const RngStream stream(7);
  const auto x_T = initial_state(stream, 50, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sample_ddim(s, d, x_T, VarianceRule::deterministic(), stream));
  }
}
BENCHMARK(BM_SequentialDdim);

void BM_Parallel(benchmark::State& state, ParallelMode mode) {
  const int devices = static_cast<int>(state.range(0));
  const auto s = default_schedule(48);
  const auto d = Denoiser::analytic(bench_mixture());
  const RngStream stream(7);
  const auto x_T = initial_state(stream, 48, 2);
  ParallelOptions opts;
  opts.pool = std::make_shared<WorkerPool>(static_cast<std::size_t>(devices));
  for (auto _ : state) {
    auto run = mode == ParallelMode::Aggressive
                   ? run_aggressive(s, d, x_T, devices, VarianceRule::deterministic(), stream, opts)
                   : run_conservative(s, d, x_T, devices, VarianceRule::deterministic(), stream,
                                      opts);
    benchmark::DoNotOptimize(run);
  }
  state.counters["rounds"] =
      plan_blocks(48, devices, mode).total_rounds;
}
BENCHMARK_CAPTURE(BM_Parallel, aggressive, ParallelMode::Aggressive)->DenseRange(1, 4)->UseRealTime();
BENCHMARK_CAPTURE(BM_Parallel, conservative, ParallelMode::Conservative)
    ->DenseRange(1, 4)
    ->UseRealTime();

void BM_EpsOracle(benchmark::State& state) {
  const auto gm = bench_mixture();
  const StateVec x{0.2, -0.4};
  for (auto _ : state) benchmark::DoNotOptimize(eps_at(gm, x, 0.37));
}
BENCHMARK(BM_EpsOracle);

}  // namespace
}  // namespace skipdiff
