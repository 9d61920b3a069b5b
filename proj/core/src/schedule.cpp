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

#include "skipdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "skipdiff/error.hpp"

namespace skipdiff {

std::string_view to_string(ScheduleKind kind) noexcept {
  switch (kind) {
    case ScheduleKind::LinearBeta: return "linear_beta";
    case ScheduleKind::Cosine: return "cosine";
  }
  return "unknown";
}

double NoiseSchedule::alpha_at(int t) const {
  if (t < 0 || t > steps()) {
    fail(ErrorCode::TimestepOutOfRange,
         "t=" + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta_at(int t) const {
  if (t < 1 || t > steps()) {
    fail(ErrorCode::TimestepOutOfRange,
         "beta index t=" + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
  return betas_[static_cast<std::size_t>(t)];
}

namespace {

void check_alpha_bar(const std::vector<double>& alpha_bar) {
  for (std::size_t t = 1; t < alpha_bar.size(); ++t) {
    const double a = alpha_bar[t];
    if (!(a > 0.0 && a < 1.0) || !(a < alpha_bar[t - 1])) {
      fail(ErrorCode::InvalidScheduleParams,
           "alpha_bar not strictly decreasing in (0,1) at t=" + std::to_string(t));
    }
  }
}

}  // namespace

NoiseSchedule build_linear_beta(int steps, double beta_start, double beta_end) {
  if (steps < 1 || !(beta_start > 0.0) || !(beta_start <= beta_end) ||
      !(beta_end < 1.0)) {
    fail(ErrorCode::InvalidScheduleParams,
         "linear beta needs T>=1 and 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps) + 1, 0.0);
  std::vector<double> alpha_bar(static_cast<std::size_t>(steps) + 1, 1.0);
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    const double beta = beta_start + frac * (beta_end - beta_start);
    betas[t] = beta;
    alpha_bar[t] = alpha_bar[t - 1] * (1.0 - beta);
  }
  check_alpha_bar(alpha_bar);
  return NoiseSchedule(ScheduleKind::LinearBeta, std::move(alpha_bar), std::move(betas));
}

NoiseSchedule build_cosine(int steps, double offset) {
  if (steps < 1 || !(offset > 0.0) || !std::isfinite(offset)) {
    fail(ErrorCode::InvalidScheduleParams, "cosine needs T>=1 and offset > 0");
  }
  const auto f = [offset](double u) {
    const double c = std::cos((u + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> betas(static_cast<std::size_t>(steps) + 1, 0.0);
  std::vector<double> alpha_bar(static_cast<std::size_t>(steps) + 1, 1.0);
  double prev_raw = 1.0;
  bool clamped = false;
  for (int t = 1; t <= steps; ++t) {
    const double raw = f(static_cast<double>(t) / steps) / f0;
    double beta = 1.0 - raw / prev_raw;
    if (beta > kMaxCosineBeta) {
      beta = kMaxCosineBeta;
      clamped = true;
    }
    prev_raw = raw;
    betas[t] = beta;
    // Direct formula until the first clamp, cumulative product afterwards.
    alpha_bar[t] = clamped ? alpha_bar[t - 1] * (1.0 - beta) : raw;
  }
  check_alpha_bar(alpha_bar);
  return NoiseSchedule(ScheduleKind::Cosine, std::move(alpha_bar), std::move(betas));
}

NoiseSchedule default_schedule(int steps) {
  if (steps < 1) fail(ErrorCode::InvalidScheduleParams, "T must be >= 1");
  const double scale = 1000.0 / steps;
  const double beta_end = std::min(0.02 * scale, kMaxCosineBeta);
  const double beta_start = std::min(1e-4 * scale, beta_end);
  return build_linear_beta(steps, beta_start, beta_end);
}

double SigmaGrid::sigma_at(int i) const {
  if (i < 0 || i > steps()) {
    fail(ErrorCode::IndexOutOfRange,
         "grid index " + std::to_string(i) + " outside [0, " + std::to_string(steps()) + "]");
  }
  return sigmas_[static_cast<std::size_t>(i)];
}

SigmaGrid SigmaGrid::from_values(std::vector<double> sigmas) {
  if (sigmas.size() < 2 || !(sigmas.front() > 0.0) || sigmas.back() != 0.0) {
    fail(ErrorCode::InvalidScheduleParams, "sigma grid must start > 0 and end at 0");
  }
  for (std::size_t i = 1; i < sigmas.size(); ++i) {
    if (!(sigmas[i] < sigmas[i - 1]) || !std::isfinite(sigmas[i - 1])) {
      fail(ErrorCode::InvalidScheduleParams, "sigma grid must be strictly decreasing");
    }
  }
  return SigmaGrid(std::move(sigmas));
}

SigmaGrid build_sigma_grid(int steps, double sigma_min, double sigma_max, double rho) {
  if (steps < 1 || !(sigma_min > 0.0) || !(sigma_min < sigma_max) || !(rho >= 1.0) ||
      !std::isfinite(sigma_max) || !std::isfinite(rho)) {
    fail(ErrorCode::InvalidScheduleParams,
         "sigma grid needs N>=1, 0 < sigma_min < sigma_max, rho >= 1");
  }
  const double hi = std::pow(sigma_max, 1.0 / rho);
  const double lo = std::pow(sigma_min, 1.0 / rho);
  std::vector<double> sigmas(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int i = 0; i < steps; ++i) {
    sigmas[i] = std::pow(hi + (static_cast<double>(i) / steps) * (lo - hi), rho);
  }
  return SigmaGrid::from_values(std::move(sigmas));
}

}  // namespace skipdiff
