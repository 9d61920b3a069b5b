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

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/report.hpp"
#include "skipdiff/vector.hpp"

namespace skipdiff {

// Environment variable that caps the number of worker threads a pool may
// start. Logical devices (block size) are unaffected; tasks of one round are
// then spread over fewer threads.
inline constexpr const char* kMaxWorkersEnv = "SKIPDIFF_MAX_WORKERS";

// min(requested, $SKIPDIFF_MAX_WORKERS) when the variable holds a positive integer.
std::size_t capped_worker_count(std::size_t requested);

struct EvalTask {
  StateVec x;
  int t = 0;
};

using EvalFn = std::function<NoisePred(const StateVec&, int, EvalContext&)>;

struct RoundTiming {
  bool virtual_clock = false;
  double dispatch_overhead_ms = 0.0;
  // When set, each task sleeps a pseudo-random 0..max_jitter_ms before it
  // runs, keyed by (seed, round_key, task index). Used to shuffle completion
  // order in tests.
  std::optional<std::uint64_t> jitter_seed;
  double max_jitter_ms = 0.0;
  std::uint64_t round_key = 0;
};

struct RoundResult {
  std::vector<NoisePred> outputs;  // ordered by task index
  RoundReport report;
};

// Fixed-size pool of worker threads executing one synchronous round at a
// time. Results are gathered by task index, so completion order never leaks
// into outputs. Not reentrant: one round in flight per pool.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const noexcept { return threads_.size(); }

  // Runs every task, waits for all of them, then rethrows the lowest-index
  // task failure (if any) as WorkerFailure with the original nested.
  RoundResult run_round(std::span<const EvalTask> tasks, const EvalFn& fn,
                        const RoundTiming& timing);

 private:
  struct Job;
  void worker_loop(std::size_t id);

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  Job* job_ = nullptr;
  std::uint64_t generation_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

// Evaluates `tasks` concurrently (at most `devices` of them). Uses `pool`
// when given, otherwise a temporary pool of capped_worker_count(devices).
RoundResult execute_round(const Denoiser& d, const NoiseSchedule& s,
                          std::span<const EvalTask> tasks, std::size_t devices,
                          WorkerPool* pool = nullptr);

}  // namespace skipdiff
