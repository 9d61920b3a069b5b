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
#include <vector>

#include "skipdiff/vector.hpp"

namespace skipdiff {

struct WorkerSpan {
  std::size_t worker = 0;
  double start_ms = 0.0;  // relative to the start of the round
  double end_ms = 0.0;
};

// Timing and accounting for one synchronous round of denoiser evaluations.
struct RoundReport {
  int anchor_t = 0;
  std::size_t parallel_evals = 0;
  double round_wall_ms = 0.0;
  std::vector<WorkerSpan> worker_spans;
};

struct TrajectoryPoint {
  int t = 0;
  StateVec x;
};

// States visited by a sampler, from the initial timestep down to t = 0.
struct Trajectory {
  std::vector<TrajectoryPoint> states;
  std::size_t eval_count = 0;
  double wall_ms = 0.0;

  const StateVec& final_state() const { return states.back().x; }
  // Throws TimestepMismatch unless t is strictly decreasing and ends at 0.
  void validate() const;
};

// A trajectory plus the per-round accounting that produced it.
struct SampleRun {
  Trajectory trajectory;
  std::vector<RoundReport> rounds;
};

}  // namespace skipdiff
