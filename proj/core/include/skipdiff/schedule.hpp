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
#include <string_view>
#include <vector>

namespace skipdiff {

enum class ScheduleKind { LinearBeta, Cosine };

std::string_view to_string(ScheduleKind kind) noexcept;

// Discrete variance-preserving noise schedule.
//
// NOTE on notation: alpha_bar(t) is the *cumulative* signal retention, so the
// forward marginal is x_t = sqrt(alpha_bar(t)) x_0 + sqrt(1 - alpha_bar(t)) e.
// Every transition formula in this library is written in terms of it; there
// is no separate per-step alpha anywhere in the public API.
//
// Invariants (enforced by the builders):
//   alpha_bar(0) == 1 exactly, so a transition into t = 0 yields the clean
//   sample with zero residual noise;
//   alpha_bar is strictly decreasing on 1..T and lies in (0, 1) there.
// Immutable after construction; safe to share across threads.
class NoiseSchedule {
 public:
  int steps() const noexcept { return static_cast<int>(alpha_bar_.size()) - 1; }
  ScheduleKind kind() const noexcept { return kind_; }

  // alpha_bar[t] for 0 <= t <= T; throws TimestepOutOfRange otherwise.
  double alpha_at(int t) const;
  // beta[t] for 1 <= t <= T.
  double beta_at(int t) const;

  const std::vector<double>& alpha_bar() const noexcept { return alpha_bar_; }
  // Indexed 0..T; betas()[0] is 0 and carries no meaning.
  const std::vector<double>& betas() const noexcept { return betas_; }

 private:
  friend NoiseSchedule build_linear_beta(int, double, double);
  friend NoiseSchedule build_cosine(int, double);

  NoiseSchedule(ScheduleKind kind, std::vector<double> alpha_bar,
                std::vector<double> betas)
      : kind_(kind), alpha_bar_(std::move(alpha_bar)), betas_(std::move(betas)) {}

  ScheduleKind kind_;
  std::vector<double> alpha_bar_;
  std::vector<double> betas_;
};

inline double alpha_at(const NoiseSchedule& s, int t) { return s.alpha_at(t); }

// Betas linearly spaced from beta_start (t = 1) to beta_end (t = T).
// Requires 0 < beta_start <= beta_end < 1 and T >= 1.
NoiseSchedule build_linear_beta(int steps, double beta_start, double beta_end);

// alpha_bar(t) = f(t/T) / f(0) with f(u) = cos^2((u + offset)/(1 + offset) * pi/2).
// Betas are back-derived and clamped to kMaxCosineBeta, after which alpha_bar
// is recomputed as the product of the clamped betas.
NoiseSchedule build_cosine(int steps, double offset);

inline constexpr double kMaxCosineBeta = 0.999;

// Linear-beta schedule with the 1000-step endpoints (1e-4, 0.02) rescaled by
// 1000/T so short schedules reach a comparable terminal noise level. beta_end
// is capped at kMaxCosineBeta for T < 21.
NoiseSchedule default_schedule(int steps);

// Descending noise levels for the Euler ODE sampler; sigmas[N] == 0.
class SigmaGrid {
 public:
  int steps() const noexcept { return static_cast<int>(sigmas_.size()) - 1; }
  double sigma_at(int i) const;
  const std::vector<double>& sigmas() const noexcept { return sigmas_; }

  // Builds a grid from explicit values; must be strictly decreasing, start
  // positive and end at exactly 0.
  static SigmaGrid from_values(std::vector<double> sigmas);

 private:
  explicit SigmaGrid(std::vector<double> sigmas) : sigmas_(std::move(sigmas)) {}
  std::vector<double> sigmas_;
};

// rho-spaced grid between sigma_max and sigma_min, followed by a final 0.
SigmaGrid build_sigma_grid(int steps, double sigma_min, double sigma_max,
                           double rho);

}  // namespace skipdiff
