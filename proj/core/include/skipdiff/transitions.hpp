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

#include <string>

#include "skipdiff/schedule.hpp"
#include "skipdiff/vector.hpp"

// Closed-form skip transitions x_t -> x_{t-k}. Each operator is local: it
// needs only the two noise levels involved, never the global timestep
// subsequence. All functions are pure; noise z is always supplied by the
// caller so that randomness stays externally keyed.
//
// The "raw" overloads take the two cumulative noise levels directly
// (abar_from = alpha_bar(t), abar_to = alpha_bar(t-k)). The schedule overloads
// validate (t, k) and then defer to them.
namespace skipdiff {

// sigma_{t,k} policy for the DDIM family.
struct VarianceRule {
  enum class Kind { Deterministic, DdpmInduced, Eta };

  Kind kind = Kind::Deterministic;
  double eta = 0.0;  // only meaningful for Kind::Eta, must lie in [0, 1]

  static VarianceRule deterministic() { return {Kind::Deterministic, 0.0}; }
  static VarianceRule ddpm_induced() { return {Kind::DdpmInduced, 1.0}; }
  static VarianceRule with_eta(double eta) { return {Kind::Eta, eta}; }

  void validate() const;
  std::string describe() const;
};

// Coefficients of the k-step DDIM transition
//   x_{t-k} = kappa * x_t + lambda * x0 + sigma * z.
struct SkipCoeffs {
  double kappa = 0.0;
  double lambda = 0.0;
  double sigma = 0.0;
};

// Gaussian q(x_{t-k} | x_t, x_0) = N(mean, variance * I).
struct SkipPosterior {
  StateVec mean;
  double variance = 0.0;
};

// x0 implied by (x_t, eps): (x - sqrt(1 - abar) eps) / sqrt(abar).
StateVec predict_x0(double abar, const StateVec& x, const NoisePred& eps);

// ---- raw kernels -----------------------------------------------------------

// sigma^2_{t,k} = (1 - abar_t/abar_{t-k}) (1 - abar_{t-k}) / (1 - abar_t).
double ddpm_skip_variance(double abar_from, double abar_to);

SkipPosterior ddpm_skip_posterior(double abar_from, double abar_to, const StateVec& x_t,
                                  const StateVec& x0_hat);

// sigma_{t,k} selected by `rule` for the given pair of noise levels.
double rule_sigma(const VarianceRule& rule, double abar_from, double abar_to);

// Throws VarianceTooLarge if sigma^2 > 1 - abar_to.
SkipCoeffs ddim_coeffs(double abar_from, double abar_to, double sigma);

// Update in x0 form: sqrt(abar_to) x0_hat + sqrt(1 - abar_to - sigma^2) eps + sigma z,
// with x0_hat = predict_x0(abar_from, x_t, eps). `z` may be empty when
// sigma == 0.
StateVec ddim_update(double abar_from, double abar_to, const StateVec& x_t,
                     const NoisePred& eps, double sigma, const StateVec& z);

// ---- schedule-level operators ---------------------------------------------

// Requires 1 <= k <= t <= T. InvalidSkip for k < 1, TimestepOutOfRange otherwise.
void check_skip(const NoiseSchedule& s, int t, int k);

SkipPosterior ddpm_skip_posterior(const NoiseSchedule& s, int t, int k,
                                  const StateVec& x_t, const StateVec& x0_hat);

// mean + sqrt(variance) z. `z` may be empty when the variance is zero.
StateVec ddpm_skip_sample(const NoiseSchedule& s, int t, int k, const StateVec& x_t,
                          const StateVec& x0_hat, const StateVec& z);

SkipCoeffs ddim_skip_coeffs(const NoiseSchedule& s, int t, int k, const VarianceRule& rule);

StateVec ddim_skip(const NoiseSchedule& s, int t, int k, const StateVec& x_t,
                   const NoisePred& eps, const VarianceRule& rule, const StateVec& z);

// One fused Euler step across k grid intervals starting at grid index i:
// x + (sigma_{i+k} - sigma_i) v. Grid indices run in the sampling direction.
StateVec euler_skip(const SigmaGrid& g, int i, int k, const StateVec& x, const StateVec& v);

}  // namespace skipdiff
