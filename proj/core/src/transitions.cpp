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

#include "skipdiff/transitions.hpp"

#include <cmath>
#include <sstream>

namespace skipdiff {

namespace {

// Radicands that are negative only through rounding are snapped to zero.
constexpr double kRadicandSlack = 1e-12;

void check_noise(const StateVec& x, const StateVec& z, bool needed) {
  if (needed || !z.empty()) check_same_dim(x, z, "noise z");
}

}  // namespace

void VarianceRule::validate() const {
  if (kind == Kind::Eta) {
    check(eta >= 0.0 && eta <= 1.0, ErrorCode::InvalidVarianceRule, "eta must lie in [0, 1]");
  }
}

std::string VarianceRule::describe() const {
  switch (kind) {
    case Kind::Deterministic: return "deterministic";
    case Kind::DdpmInduced: return "ddpm";
    case Kind::Eta: {
      std::ostringstream out;
      out << "eta:" << eta;
      return out.str();
    }
  }
  return "unknown";
}

StateVec predict_x0(double abar, const StateVec& x, const NoisePred& eps) {
  check_same_dim(x, eps, "noise prediction");
  const double noise = std::sqrt(1.0 - abar);
  const double signal = std::sqrt(abar);
  StateVec x0(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) x0[j] = (x[j] - noise * eps[j]) / signal;
  return x0;
}

double ddpm_skip_variance(double abar_from, double abar_to) {
  const double ratio = abar_from / abar_to;
  return (1.0 - ratio) * (1.0 - abar_to) / (1.0 - abar_from);
}

SkipPosterior ddpm_skip_posterior(double abar_from, double abar_to, const StateVec& x_t,
                                  const StateVec& x0_hat) {
  check_same_dim(x_t, x0_hat, "x0 estimate");
  const double ratio = abar_from / abar_to;
  const double denom = 1.0 - abar_from;
  const double coef_xt = std::sqrt(ratio) * (1.0 - abar_to) / denom;
  const double coef_x0 = std::sqrt(abar_to) * (1.0 - ratio) / denom;
  return {axpby(coef_xt, x_t, coef_x0, x0_hat), ddpm_skip_variance(abar_from, abar_to)};
}

double rule_sigma(const VarianceRule& rule, double abar_from, double abar_to) {
  rule.validate();
  switch (rule.kind) {
    case VarianceRule::Kind::Deterministic: return 0.0;
    case VarianceRule::Kind::DdpmInduced:
      return std::sqrt(ddpm_skip_variance(abar_from, abar_to));
    case VarianceRule::Kind::Eta:
      return rule.eta * std::sqrt(ddpm_skip_variance(abar_from, abar_to));
  }
  return 0.0;
}

namespace {

double eps_coefficient(double abar_to, double sigma) {
  double radicand = 1.0 - abar_to - sigma * sigma;
  if (radicand < 0.0) {
    if (radicand < -kRadicandSlack) {
      fail(ErrorCode::VarianceTooLarge, "sigma^2 exceeds 1 - alpha_bar(t-k)");
    }
    radicand = 0.0;
  }
  return std::sqrt(radicand);
}

}  // namespace

SkipCoeffs ddim_coeffs(double abar_from, double abar_to, double sigma) {
  const double kappa = eps_coefficient(abar_to, sigma) / std::sqrt(1.0 - abar_from);
  return {kappa, std::sqrt(abar_to) - kappa * std::sqrt(abar_from), sigma};
}

StateVec ddim_update(double abar_from, double abar_to, const StateVec& x_t,
                     const NoisePred& eps, double sigma, const StateVec& z) {
  check_noise(x_t, z, sigma != 0.0);
  const double coef_eps = eps_coefficient(abar_to, sigma);
  const StateVec x0 = predict_x0(abar_from, x_t, eps);
  StateVec out = axpby(std::sqrt(abar_to), x0, coef_eps, eps);
  if (sigma != 0.0) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += sigma * z[j];
  }
  return out;
}

void check_skip(const NoiseSchedule& s, int t, int k) {
  if (k < 1) fail(ErrorCode::InvalidSkip, "skip length k=" + std::to_string(k) + " < 1");
  if (t > s.steps() || k > t) {
    fail(ErrorCode::TimestepOutOfRange, "skip t=" + std::to_string(t) +
                                            ", k=" + std::to_string(k) +
                                            " with T=" + std::to_string(s.steps()));
  }
}

SkipPosterior ddpm_skip_posterior(const NoiseSchedule& s, int t, int k, const StateVec& x_t,
                                  const StateVec& x0_hat) {
  check_skip(s, t, k);
  return ddpm_skip_posterior(s.alpha_at(t), s.alpha_at(t - k), x_t, x0_hat);
}

StateVec ddpm_skip_sample(const NoiseSchedule& s, int t, int k, const StateVec& x_t,
                          const StateVec& x0_hat, const StateVec& z) {
  SkipPosterior post = ddpm_skip_posterior(s, t, k, x_t, x0_hat);
  check_noise(x_t, z, post.variance != 0.0);
  if (post.variance == 0.0) return std::move(post.mean);
  const double sd = std::sqrt(post.variance);
  for (std::size_t j = 0; j < post.mean.size(); ++j) post.mean[j] += sd * z[j];
  return std::move(post.mean);
}

SkipCoeffs ddim_skip_coeffs(const NoiseSchedule& s, int t, int k, const VarianceRule& rule) {
  check_skip(s, t, k);
  const double from = s.alpha_at(t);
  const double to = s.alpha_at(t - k);
  return ddim_coeffs(from, to, rule_sigma(rule, from, to));
}

StateVec ddim_skip(const NoiseSchedule& s, int t, int k, const StateVec& x_t,
                   const NoisePred& eps, const VarianceRule& rule, const StateVec& z) {
  check_skip(s, t, k);
  const double from = s.alpha_at(t);
  const double to = s.alpha_at(t - k);
  return ddim_update(from, to, x_t, eps, rule_sigma(rule, from, to), z);
}

StateVec euler_skip(const SigmaGrid& g, int i, int k, const StateVec& x, const StateVec& v) {
  if (i < 0 || k < 1 || i + k > g.steps()) {
    fail(ErrorCode::IndexOutOfRange, "euler skip i=" + std::to_string(i) + ", k=" +
                                         std::to_string(k) + " on N=" +
                                         std::to_string(g.steps()));
  }
  check_same_dim(x, v, "velocity");
  const double step = g.sigma_at(i + k) - g.sigma_at(i);
  StateVec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + step * v[j];
  return out;
}

}  // namespace skipdiff
