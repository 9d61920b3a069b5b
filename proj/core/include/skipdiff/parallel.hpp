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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/report.hpp"
#include "skipdiff/rng.hpp"
#include "skipdiff/schedule.hpp"
#include "skipdiff/sequential.hpp"
#include "skipdiff/transitions.hpp"
#include "skipdiff/worker_pool.hpp"

// Draft-and-refine parallel sampling.
//
// From an anchor (x_t, eps_t) a block drafts x_{t-1}, ..., x_{t-k} with skip
// transitions, evaluates the k noise predictions concurrently at the drafts,
// and then replays the ordinary unit-step updates with those predictions.
//
//   Aggressive:   the prediction made at the draft x_{t-k} is cached and
//                 reused at the next anchor; one parallel round per k steps.
//   Conservative: the anchor prediction is recomputed in a stand-alone round,
//                 and eps_{t-k} pushes one extra step; two rounds per k+1 steps.
//
// Noise keying: the state that survives into timestep s always consumes
// derive(s, Transition); drafts that are later discarded (i >= 2) consume
// derive(s, Draft). With a state-independent denoiser this makes both modes
// reproduce the sequential sampler bit for bit.
namespace skipdiff {

enum class ParallelMode { Aggressive, Conservative };

std::string_view to_string(ParallelMode mode) noexcept;

struct Block {
  int anchor_t = 0;
  int k = 0;  // drafts (parallel evaluations) in this block

  friend bool operator==(const Block&, const Block&) = default;
};

struct BlockPlan {
  ParallelMode mode = ParallelMode::Aggressive;
  int steps = 0;
  int devices = 0;
  bool recompute_anchor_eps = false;
  std::vector<Block> blocks;
  int total_rounds = 0;
  int total_evals = 0;
};

// Aggressive blocks take k = devices steps greedily from T, the last block
// takes the remainder. Conservative blocks take k + 1 = devices + 1 steps;
// a trailing single step is absorbed by shrinking the previous block, or
// becomes a k = 0 block (stand-alone evaluation only) when that is impossible.
BlockPlan plan_blocks(int steps, int devices, ParallelMode mode,
                      bool recompute_anchor_eps = false);

struct ParallelOptions {
  // Worker threads; 0 means one per device (subject to SKIPDIFF_MAX_WORKERS).
  std::size_t workers = 0;
  // Aggressive only: evaluate the refined anchor instead of reusing the
  // prediction cached at its draft (ablation).
  bool recompute_anchor_eps = false;
  // Randomizes worker completion order (see RoundTiming).
  std::optional<std::uint64_t> jitter_seed;
  double max_jitter_ms = 0.2;
  // Reuse an existing pool across runs; must have at least one thread.
  std::shared_ptr<WorkerPool> pool;
};

// DDIM update family (the default for both modes).
SampleRun run_aggressive(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                         int devices, const VarianceRule& rule, const RngStream& stream,
                         const ParallelOptions& options = {});
SampleRun run_conservative(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                           int devices, const VarianceRule& rule, const RngStream& stream,
                           const ParallelOptions& options = {});

// DDPM-posterior update family.
SampleRun run_aggressive_ddpm(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                              int devices, const RngStream& stream,
                              const ParallelOptions& options = {});
SampleRun run_conservative_ddpm(const NoiseSchedule& s, const Denoiser& d,
                                const StateVec& x_T, int devices, const RngStream& stream,
                                const ParallelOptions& options = {});

// Euler ODE family over a sigma grid; timestep t maps to grid index N - t.
// The aggressive mode's final cached evaluation lands on sigma = 0, so the
// velocity must be defined there (mixture_velocity returns its zero limit).
SampleRun run_aggressive_euler(const SigmaGrid& g, const VelocityFn& velocity,
                               const StateVec& x_init, int devices,
                               const ParallelOptions& options = {});
SampleRun run_conservative_euler(const SigmaGrid& g, const VelocityFn& velocity,
                                 const StateVec& x_init, int devices,
                                 const ParallelOptions& options = {});

}  // namespace skipdiff
