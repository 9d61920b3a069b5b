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

#include "skipdiff/worker_pool.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <random>
#include <string>

#include "skipdiff/rng.hpp"

namespace skipdiff {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void sleep_ms(double ms) {
  if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

}  // namespace

std::size_t capped_worker_count(std::size_t requested) {
  const char* raw = std::getenv(kMaxWorkersEnv);
  if (raw == nullptr) return requested;
  char* end = nullptr;
  const long cap = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || cap <= 0) return requested;
  return std::min(requested, static_cast<std::size_t>(cap));
}

struct WorkerPool::Job {
  std::span<const EvalTask> tasks;
  const EvalFn* fn = nullptr;
  const RoundTiming* timing = nullptr;
  Clock::time_point start;
  std::atomic<std::size_t> next{0};
  std::size_t remaining = 0;  // guarded by mutex_
  std::size_t active = 0;     // workers holding a pointer to this job; guarded by mutex_
  std::vector<NoisePred> outputs;
  std::vector<EvalContext> contexts;
  std::vector<WorkerSpan> spans;
  std::vector<std::exception_ptr> errors;
};

WorkerPool::WorkerPool(std::size_t workers) {
  check(workers >= 1, ErrorCode::InvalidPlanParams, "worker pool needs at least one worker");
  threads_.reserve(workers);
  for (std::size_t id = 0; id < workers; ++id) {
    threads_.emplace_back([this, id] { worker_loop(id); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::worker_loop(std::size_t id) {
  std::uint64_t seen = 0;
  for (;;) {
    Job* job = nullptr;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      job = job_;
      if (job == nullptr) continue;
      ++job->active;
    }
    std::size_t finished = 0;
    for (std::size_t i = job->next.fetch_add(1); i < job->tasks.size();
         i = job->next.fetch_add(1)) {
      const RoundTiming& timing = *job->timing;
      if (timing.jitter_seed) {
        std::mt19937_64 rng(mix64(*timing.jitter_seed ^ mix64(timing.round_key) ^ mix64(i + 1)));
        sleep_ms(std::uniform_real_distribution<double>(0.0, timing.max_jitter_ms)(rng));
      }
      const double begin = ms_since(job->start);
      try {
        job->outputs[i] = (*job->fn)(job->tasks[i].x, job->tasks[i].t, job->contexts[i]);
      } catch (...) {
        job->errors[i] = std::current_exception();
      }
      job->spans[i] = {id, begin, ms_since(job->start)};
      ++finished;
    }
    {
      std::lock_guard lock(mutex_);
      job->remaining -= finished;
      --job->active;
      if (job->remaining == 0 && job->active == 0) done_.notify_all();
    }
  }
}

RoundResult WorkerPool::run_round(std::span<const EvalTask> tasks, const EvalFn& fn,
                                  const RoundTiming& timing) {
  Job job;
  job.tasks = tasks;
  job.fn = &fn;
  job.timing = &timing;
  job.remaining = tasks.size();
  job.outputs.resize(tasks.size());
  job.contexts.resize(tasks.size());
  job.spans.resize(tasks.size());
  job.errors.resize(tasks.size());

  job.start = Clock::now();
  if (!timing.virtual_clock) sleep_ms(timing.dispatch_overhead_ms);
  if (!tasks.empty()) {
    std::unique_lock lock(mutex_);
    job_ = &job;
    ++generation_;
    wake_.notify_all();
    done_.wait(lock, [&] { return job.remaining == 0 && job.active == 0; });
    job_ = nullptr;
  }
  const double wall = ms_since(job.start);

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!job.errors[i]) continue;
    try {
      std::rethrow_exception(job.errors[i]);
    } catch (...) {
      std::throw_with_nested(Error(ErrorCode::WorkerFailure,
                                   "task " + std::to_string(i) + " at t=" +
                                       std::to_string(tasks[i].t) + " failed"));
    }
  }

  RoundResult result;
  result.report.anchor_t = 0;
  for (const auto& ctx : job.contexts) result.report.parallel_evals += ctx.evaluations;
  if (timing.virtual_clock) {
    double longest = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const double ms = job.contexts[i].virtual_ms;
      longest = std::max(longest, ms);
      job.spans[i] = {job.spans[i].worker, timing.dispatch_overhead_ms,
                      timing.dispatch_overhead_ms + ms};
    }
    result.report.round_wall_ms = timing.dispatch_overhead_ms + longest;
  } else {
    result.report.round_wall_ms = wall;
  }
  result.report.worker_spans = std::move(job.spans);
  result.outputs = std::move(job.outputs);
  return result;
}

RoundResult execute_round(const Denoiser& d, const NoiseSchedule& s,
                          std::span<const EvalTask> tasks, std::size_t devices,
                          WorkerPool* pool) {
  check(devices >= 1, ErrorCode::InvalidPlanParams, "devices must be >= 1");
  check(tasks.size() <= devices, ErrorCode::InvalidPlanParams,
        std::to_string(tasks.size()) + " tasks exceed " + std::to_string(devices) + " devices");
  std::optional<WorkerPool> local;
  if (pool == nullptr) pool = &local.emplace(capped_worker_count(devices));
  const EvalFn fn = [&](const StateVec& x, int t, EvalContext& ctx) {
    return d.evaluate(s, x, t, &ctx);
  };
  RoundTiming timing;
  timing.virtual_clock = d.uses_virtual_clock();
  timing.dispatch_overhead_ms = d.dispatch_overhead_ms();
  RoundResult result = pool->run_round(tasks, fn, timing);
  if (!tasks.empty()) result.report.anchor_t = tasks.front().t;
  return result;
}

}  // namespace skipdiff
