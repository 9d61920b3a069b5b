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

#include "skipdiff/parallel.hpp"

#include <algorithm>
#include <string>

namespace skipdiff {

std::string_view to_string(ParallelMode mode) noexcept {
  switch (mode) {
    case ParallelMode::Aggressive: return "aggressive";
    case ParallelMode::Conservative: return "conservative";
  }
  return "unknown";
}

BlockPlan plan_blocks(int steps, int devices, ParallelMode mode, bool recompute_anchor_eps) {
  check(steps >= 1 && devices >= 1, ErrorCode::InvalidPlanParams,
        "plan needs T >= 1 and devices >= 1");
  BlockPlan plan;
  plan.mode = mode;
  plan.steps = steps;
  plan.devices = devices;
  plan.recompute_anchor_eps = recompute_anchor_eps && mode == ParallelMode::Aggressive;

  if (mode == ParallelMode::Aggressive) {
    for (int t = steps; t > 0;) {
      const int k = std::min(devices, t);
      plan.blocks.push_back({t, k});
      t -= k;
    }
    const int blocks = static_cast<int>(plan.blocks.size());
    const int extra = plan.recompute_anchor_eps ? blocks - 1 : 0;
    plan.total_evals = steps + 1 + extra;
    plan.total_rounds = 1 + blocks + extra;
    return plan;
  }

  for (int t = steps; t > 0;) {
    const int span = std::min(devices + 1, t);
    plan.blocks.push_back({t, span - 1});
    t -= span;
  }
  // A single trailing step cannot carry a parallel round. Borrow one draft
  // from the previous block when it has two or more.
  if (plan.blocks.size() >= 2 && plan.blocks.back().k == 0) {
    Block& prev = plan.blocks[plan.blocks.size() - 2];
    if (prev.k >= 2) {
      --prev.k;
      plan.blocks.back() = {prev.anchor_t - (prev.k + 1), 1};
    }
  }
  for (const Block& b : plan.blocks) {
    plan.total_evals += 1 + b.k;
    plan.total_rounds += b.k > 0 ? 2 : 1;
  }
  return plan;
}

namespace {

// Everything the block driver needs from an update family.
struct Family {
  int steps = 0;
  std::size_t dim = 0;
  EvalFn eval;
  bool virtual_clock = false;
  double dispatch_overhead_ms = 0.0;
  // Transition t -> t - k from (x, prediction at t); z keyed by (t - k, role).
  std::function<StateVec(int, int, const StateVec&, const NoisePred&, NoiseRole)> skip;
};

class BlockDriver {
 public:
  BlockDriver(const Family& family, int devices, const ParallelOptions& options)
      : family_(family), devices_(devices), options_(options) {
    check(devices >= 1, ErrorCode::InvalidPlanParams, "devices must be >= 1");
    pool_ = options.pool;
    if (!pool_) {
      const std::size_t workers = options.workers > 0 ? options.workers
                                                      : static_cast<std::size_t>(devices);
      pool_ = std::make_shared<WorkerPool>(capped_worker_count(workers));
    }
  }

  SampleRun run(const StateVec& x_T, ParallelMode mode) {
    check(all_finite(x_T), ErrorCode::DimensionMismatch, "initial state must be finite");
    const BlockPlan plan = plan_blocks(family_.steps, devices_, mode,
                                       options_.recompute_anchor_eps);
    run_.trajectory.states.push_back({family_.steps, x_T});
    const int end_t = mode == ParallelMode::Aggressive ? aggressive(plan, x_T)
                                                       : conservative(plan, x_T);
    auto& traj = run_.trajectory;
    check(end_t == 0, ErrorCode::PlanMismatch, "plan did not end at t=0");
    check(traj.eval_count == static_cast<std::size_t>(plan.total_evals) &&
              run_.rounds.size() == static_cast<std::size_t>(plan.total_rounds),
          ErrorCode::PlanMismatch,
          "executed " + std::to_string(traj.eval_count) + " evals in " +
              std::to_string(run_.rounds.size()) + " rounds, plan says " +
              std::to_string(plan.total_evals) + " in " + std::to_string(plan.total_rounds));
    return std::move(run_);
  }

 private:
  std::vector<NoisePred> round(int anchor_t, const std::vector<EvalTask>& tasks) {
    check(tasks.size() <= static_cast<std::size_t>(devices_), ErrorCode::InvalidPlanParams,
          "round oversubscribes devices");
    RoundTiming timing;
    timing.virtual_clock = family_.virtual_clock;
    timing.dispatch_overhead_ms = family_.dispatch_overhead_ms;
    timing.jitter_seed = options_.jitter_seed;
    timing.max_jitter_ms = options_.max_jitter_ms;
    timing.round_key = run_.rounds.size();
    RoundResult result = pool_->run_round(tasks, family_.eval, timing);
    result.report.anchor_t = anchor_t;
    run_.trajectory.eval_count += result.report.parallel_evals;
    run_.trajectory.wall_ms += result.report.round_wall_ms;
    run_.rounds.push_back(std::move(result.report));
    return std::move(result.outputs);
  }

  void keep(int t, const StateVec& x) { run_.trajectory.states.push_back({t, x}); }

  // Drafts x_{t-1..t-k} from the anchor and evaluates them in one round.
  // Returns the predictions (index i-1 holds eps at t-i); drafts[0] is x_{t-1}.
  std::vector<NoisePred> draft_round(int t, int k, const StateVec& x, const NoisePred& eps,
                                     StateVec& first_draft) {
    std::vector<EvalTask> tasks;
    tasks.reserve(static_cast<std::size_t>(k));
    for (int i = 1; i <= k; ++i) {
      const NoiseRole role = i == 1 ? NoiseRole::Transition : NoiseRole::Draft;
      tasks.push_back({family_.skip(t, i, x, eps, role), t - i});
    }
    first_draft = tasks.front().x;
    return round(t, tasks);
  }

  // Unit-step replay for i = 2..last using the draft predictions.
  StateVec refine(int t, int last, StateVec cur, const std::vector<NoisePred>& preds) {
    keep(t - 1, cur);
    for (int i = 2; i <= last; ++i) {
      cur = family_.skip(t - i + 1, 1, cur, preds[static_cast<std::size_t>(i - 2)],
                         NoiseRole::Transition);
      keep(t - i, cur);
    }
    return cur;
  }

  int aggressive(const BlockPlan& plan, StateVec x) {
    int t = family_.steps;
    NoisePred eps = round(t, {{x, t}}).front();
    bool first = true;
    for (const Block& block : plan.blocks) {
      check(block.anchor_t == t, ErrorCode::PlanMismatch, "anchor out of step with plan");
      if (plan.recompute_anchor_eps && !first) eps = round(t, {{x, t}}).front();
      first = false;
      StateVec draft;
      const auto preds = draft_round(t, block.k, x, eps, draft);
      x = refine(t, block.k, std::move(draft), preds);
      eps = preds.back();  // evaluated at the draft x_{t-k}, carried to the next anchor
      t -= block.k;
    }
    return t;
  }

  int conservative(const BlockPlan& plan, StateVec x) {
    int t = family_.steps;
    for (const Block& block : plan.blocks) {
      check(block.anchor_t == t, ErrorCode::PlanMismatch, "anchor out of step with plan");
      const NoisePred eps = round(t, {{x, t}}).front();
      if (block.k == 0) {
        x = family_.skip(t, 1, x, eps, NoiseRole::Transition);
        keep(t - 1, x);
        t -= 1;
        continue;
      }
      StateVec draft;
      const auto preds = draft_round(t, block.k, x, eps, draft);
      x = refine(t, block.k + 1, std::move(draft), preds);
      t -= block.k + 1;
    }
    return t;
  }

  const Family& family_;
  int devices_;
  const ParallelOptions& options_;
  std::shared_ptr<WorkerPool> pool_;
  SampleRun run_;
};

Family ddim_family(const NoiseSchedule& s, const Denoiser& d, const VarianceRule& rule,
                   const RngStream& stream, std::size_t dim) {
  rule.validate();
  Family f;
  f.steps = s.steps();
  f.dim = dim;
  f.eval = [&s, &d](const StateVec& x, int t, EvalContext& ctx) {
    return d.evaluate(s, x, t, &ctx);
  };
  f.virtual_clock = d.uses_virtual_clock();
  f.dispatch_overhead_ms = d.dispatch_overhead_ms();
  f.skip = [&s, rule, &stream, dim](int t, int k, const StateVec& x, const NoisePred& eps,
                                   NoiseRole role) {
    const double sigma = rule_sigma(rule, s.alpha_at(t), s.alpha_at(t - k));
    const StateVec z = sigma != 0.0 ? stream.derive(t - k, role, dim) : StateVec{};
    return ddim_skip(s, t, k, x, eps, rule, z);
  };
  return f;
}

Family ddpm_family(const NoiseSchedule& s, const Denoiser& d, const RngStream& stream,
                   std::size_t dim) {
  Family f;
  f.steps = s.steps();
  f.dim = dim;
  f.eval = [&s, &d](const StateVec& x, int t, EvalContext& ctx) {
    return d.evaluate(s, x, t, &ctx);
  };
  f.virtual_clock = d.uses_virtual_clock();
  f.dispatch_overhead_ms = d.dispatch_overhead_ms();
  f.skip = [&s, &stream, dim](int t, int k, const StateVec& x, const NoisePred& eps,
                             NoiseRole role) {
    check_skip(s, t, k);
    const StateVec x0 = predict_x0(s.alpha_at(t), x, eps);
    const bool noisy = ddpm_skip_variance(s.alpha_at(t), s.alpha_at(t - k)) != 0.0;
    const StateVec z = noisy ? stream.derive(t - k, role, dim) : StateVec{};
    return ddpm_skip_sample(s, t, k, x, x0, z);
  };
  return f;
}

Family euler_family(const SigmaGrid& g, const VelocityFn& velocity, std::size_t dim) {
  Family f;
  f.steps = g.steps();
  f.dim = dim;
  f.eval = [&g, &velocity](const StateVec& x, int t, EvalContext& ctx) {
    ++ctx.evaluations;
    return velocity(x, g.sigma_at(g.steps() - t));
  };
  f.skip = [&g](int t, int k, const StateVec& x, const NoisePred& v, NoiseRole) {
    return euler_skip(g, g.steps() - t, k, x, v);
  };
  return f;
}

}  // namespace

SampleRun run_aggressive(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                         int devices, const VarianceRule& rule, const RngStream& stream,
                         const ParallelOptions& options) {
  const Family f = ddim_family(s, d, rule, stream, x_T.size());
  return BlockDriver(f, devices, options).run(x_T, ParallelMode::Aggressive);
}

SampleRun run_conservative(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                           int devices, const VarianceRule& rule, const RngStream& stream,
                           const ParallelOptions& options) {
  const Family f = ddim_family(s, d, rule, stream, x_T.size());
  return BlockDriver(f, devices, options).run(x_T, ParallelMode::Conservative);
}

SampleRun run_aggressive_ddpm(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                              int devices, const RngStream& stream,
                              const ParallelOptions& options) {
  const Family f = ddpm_family(s, d, stream, x_T.size());
  return BlockDriver(f, devices, options).run(x_T, ParallelMode::Aggressive);
}

SampleRun run_conservative_ddpm(const NoiseSchedule& s, const Denoiser& d,
                                const StateVec& x_T, int devices, const RngStream& stream,
                                const ParallelOptions& options) {
  const Family f = ddpm_family(s, d, stream, x_T.size());
  return BlockDriver(f, devices, options).run(x_T, ParallelMode::Conservative);
}

SampleRun run_aggressive_euler(const SigmaGrid& g, const VelocityFn& velocity,
                               const StateVec& x_init, int devices,
                               const ParallelOptions& options) {
  const Family f = euler_family(g, velocity, x_init.size());
  return BlockDriver(f, devices, options).run(x_init, ParallelMode::Aggressive);
}

SampleRun run_conservative_euler(const SigmaGrid& g, const VelocityFn& velocity,
                                 const StateVec& x_init, int devices,
                                 const ParallelOptions& options) {
  const Family f = euler_family(g, velocity, x_init.size());
  return BlockDriver(f, devices, options).run(x_init, ParallelMode::Conservative);
}

}  // namespace skipdiff
