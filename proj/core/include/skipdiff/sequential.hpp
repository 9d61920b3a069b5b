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

#include <functional>
#include <optional>
#include <vector>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/report.hpp"
#include "skipdiff/rng.hpp"
#include "skipdiff/schedule.hpp"
#include "skipdiff/transitions.hpp"

// Single-stream reference samplers. Each evaluation is reported as a round of
// one so sequential and parallel runs share the same accounting.
namespace skipdiff {

// Velocity field f(x, sigma) for the Euler ODE sampler.
using VelocityFn = std::function<StateVec(const StateVec&, double)>;

// Exact mixture velocity; at sigma == 0 returns the zero limit.
VelocityFn mixture_velocity(GaussianMixture gm);

// Initial state x_T = derive(T, Init) for sample streams.
StateVec initial_state(const RngStream& stream, int steps, std::size_t dim);

// Ancestral DDPM: T evaluations, x_{t-1} = ddpm_skip_sample(t, 1, ...) with
// z = derive(t - 1, Transition) whenever the step variance is nonzero.
Trajectory sample_ddpm(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                       const RngStream& noise, std::vector<RoundReport>* rounds = nullptr);

// DDIM along `subsequence` (strictly decreasing, first entry <= T, last 0);
// defaults to T, T-1, ..., 0.
Trajectory sample_ddim(const NoiseSchedule& s, const Denoiser& d, const StateVec& x_T,
                       const VarianceRule& rule, const RngStream& noise,
                       const std::optional<std::vector<int>>& subsequence = std::nullopt,
                       std::vector<RoundReport>* rounds = nullptr);

// T, T - stride, ..., always ending at 0.
std::vector<int> strided_subsequence(int steps, int stride);

// First-order Euler integration of dx/dsigma over the grid; N evaluations.
// Trajectory timesteps count remaining grid steps (N at sigma_max, 0 at the end).
Trajectory sample_euler(const SigmaGrid& g, const GaussianMixture& gm, const StateVec& x_init);
Trajectory sample_euler(const SigmaGrid& g, const VelocityFn& velocity, const StateVec& x_init);

}  // namespace skipdiff
