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

#include "skipdiff/sequential.hpp"

#include <chrono>
#include <string>

namespace skipdiff {

void Trajectory::validate() const {
  check(!states.empty(), ErrorCode::TimestepMismatch, "empty trajectory");
  for (std::size_t i = 1; i < states.size(); ++i) {
    check(states[i].t < states[i - 1].t, ErrorCode::TimestepMismatch,
          "trajectory timesteps must strictly decrease");
  }
  check(states.back().t == 0, ErrorCode::TimestepMismatch, "trajectory must end at t=0");
}

namespace {

using Clock = std::chrono::steady_clock;

// One evaluation timed as its own round.
NoisePred timed_eval(const Denoiser& d, const NoiseSchedule& s, const StateVec& x, int t,
                     Trajectory& traj, std::vector<RoundReport>* rounds) {
  EvalContext ctx;
  const auto start = Clock::now();
  NoisePred eps = d.evaluate(s, x, t, &ctx);
  const double ms = d.uses_virtual_clock()
                        ? ctx.virtual_ms
                        : std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  traj.eval_count += ctx.evaluations;
  traj.wall_ms += ms;
  if (rounds != nullptr) rounds->push_back({t, ctx.evaluations, ms, {{0, 0.0, ms}}});
  return eps;
}

StateVec noise_if(bool needed, const RngStream& noise, int t, std::size_t dim) {
  return needed ? noise.derive(t, NoiseRole::Transition, dim) : StateVec{};
}

}  // namespace

VelocityFn mixture_velocity(GaussianMixture gm) {
  gm.validate();
  return [gm = std::move(gm)](const StateVec& x, double sigma) {
    return velocity_or_limit(gm, x, sigma);
  };
}

StateVec initial_state(const RngStream& stream, int steps, std::size_t dim) {
  return stream.derive(steps, NoiseRole::Init, dim);
}

Trajectory sample_ddpm(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                       const RngStream& noise, std::vector<RoundReport>* rounds) {
  check(all_finite(x_T), ErrorCode::DimensionMismatch, "x_T must be finite");
  Trajectory traj;
  traj.states.push_back({s.steps(), x_T});
  StateVec x = x_T;
  for (int t = s.steps(); t >= 1; --t) {
    const NoisePred eps = timed_eval(d, s, x, t, traj, rounds);
    const StateVec x0 = predict_x0(s.alpha_at(t), x, eps);
    const bool noisy = ddpm_skip_variance(s.alpha_at(t), s.alpha_at(t - 1)) != 0.0;
    x = ddpm_skip_sample(s, t, 1, x, x0, noise_if(noisy, noise, t - 1, x.size()));
    traj.states.push_back({t - 1, x});
  }
  return traj;
}

std::vector<int> strided_subsequence(int steps, int stride) {
  check(steps >= 1 && stride >= 1, ErrorCode::InvalidSubsequence, "need T >= 1 and stride >= 1");
  std::vector<int> seq;
  for (int t = steps; t > 0; t -= stride) seq.push_back(t);
  seq.push_back(0);
  return seq;
}

Trajectory sample_ddim(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                       const VarianceRule& rule, const RngStream& noise,
                       const std::optional<std::vector<int>>& subsequence,
                       std::vector<RoundReport>* rounds) {
  rule.validate();
  check(all_finite(x_T), ErrorCode::DimensionMismatch, "x_T must be finite");
  const std::vector<int> seq = subsequence.value_or(strided_subsequence(s.steps(), 1));
  check(seq.size() >= 2 && seq.front() <= s.steps() && seq.back() == 0,
        ErrorCode::InvalidSubsequence, "subsequence must start <= T and end at 0");
  for (std::size_t i = 1; i < seq.size(); ++i) {
    check(seq[i] < seq[i - 1], ErrorCode::InvalidSubsequence,
          "subsequence must be strictly decreasing");
  }

  Trajectory traj;
  traj.states.push_back({seq.front(), x_T});
  StateVec x = x_T;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const int t = seq[i];
    const int k = t - seq[i + 1];
    const NoisePred eps = timed_eval(d, s, x, t, traj, rounds);
    const double sigma = rule_sigma(rule, s.alpha_at(t), s.alpha_at(t - k));
    x = ddim_skip(s, t, k, x, eps, rule, noise_if(sigma != 0.0, noise, t - k, x.size()));
    traj.states.push_back({t - k, x});
  }
  return traj;
}

Trajectory sample_euler(const SigmaGrid& g, const VelocityFn& velocity, const StateVec& x_init) {
  check(all_finite(x_init), ErrorCode::DimensionMismatch, "x_init must be finite");
  const int n = g.steps();
  Trajectory traj;
  traj.states.push_back({n, x_init});
  StateVec x = x_init;
  const auto start = Clock::now();
  for (int i = 0; i < n; ++i) {
    const StateVec v = velocity(x, g.sigma_at(i));
    ++traj.eval_count;
    x = euler_skip(g, i, 1, x, v);
    traj.states.push_back({n - i - 1, x});
  }
  traj.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return traj;
}

Trajectory sample_euler(const SigmaGrid& g, const GaussianMixture& gm, const StateVec& x_init) {
  return sample_euler(g, mixture_velocity(gm), x_init);
}

}  // namespace skipdiff
