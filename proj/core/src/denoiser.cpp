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

#include "skipdiff/denoiser.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "skipdiff/rng.hpp"

namespace skipdiff {

namespace {

// Stream domains; distinct from the NoiseRole values used by RngStream.
constexpr std::uint32_t kStateIndependentDomain = 0x51D0'0001u;
constexpr std::uint32_t kPerturbDomain = 0x51D0'0002u;
constexpr std::uint32_t kMixtureComponentDomain = 0x51D0'0003u;
constexpr std::uint32_t kMixtureNoiseDomain = 0x51D0'0004u;

// Gaussian-mixture posterior responsibilities for a point x observed under
// component densities N(center_i, s2_i I). Computed in log space.
std::vector<double> responsibilities(const GaussianMixture& gm, const StateVec& x,
                                     const std::vector<StateVec>& centers,
                                     const std::vector<double>& s2) {
  const std::size_t n = gm.components();
  const double half_dim = 0.5 * static_cast<double>(x.size());
  std::vector<double> logr(n, -std::numeric_limits<double>::infinity());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (gm.weights[i] <= 0.0) continue;
    logr[i] = std::log(gm.weights[i]) - half_dim * std::log(s2[i]) -
              squared_distance(x, centers[i]) / (2.0 * s2[i]);
    peak = std::max(peak, logr[i]);
  }
  double total = 0.0;
  for (double& l : logr) {
    l = std::exp(l - peak);
    total += l;
  }
  for (double& l : logr) l /= total;
  return logr;
}

void check_point(const GaussianMixture& gm, const StateVec& x) {
  check_same_dim(x, gm.means.front(), "state vs mixture dimension");
}

}  // namespace

void GaussianMixture::validate() const {
  check(!weights.empty(), ErrorCode::InvalidMixture, "mixture has no components");
  check(means.size() == weights.size() && variances.size() == weights.size(),
        ErrorCode::InvalidMixture, "weights, means and variances differ in length");
  check(dim() > 0, ErrorCode::InvalidMixture, "mixture dimension must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    check(weights[i] >= 0.0 && std::isfinite(weights[i]), ErrorCode::InvalidMixture,
          "weights must be nonnegative");
    check(variances[i] > 0.0 && std::isfinite(variances[i]), ErrorCode::InvalidMixture,
          "variances must be positive");
    check(means[i].size() == dim() && all_finite(means[i]), ErrorCode::InvalidMixture,
          "means must be finite and share one dimension");
    sum += weights[i];
  }
  check(std::abs(sum - 1.0) <= 1e-12, ErrorCode::InvalidMixture, "weights must sum to 1");
}

GaussianMixture GaussianMixture::standard_normal(std::size_t dim) {
  return GaussianMixture{{1.0}, {StateVec(dim, 0.0)}, {1.0}};
}

NoisePred eps_at(const GaussianMixture& gm, const StateVec& x, double abar) {
  check_point(gm, x);
  const double signal = std::sqrt(abar);
  const std::size_t n = gm.components();
  std::vector<StateVec> centers(n);
  std::vector<double> s2(n);
  for (std::size_t i = 0; i < n; ++i) {
    centers[i] = axpby(signal, gm.means[i], 0.0, gm.means[i]);
    s2[i] = abar * gm.variances[i] + (1.0 - abar);
  }
  const auto r = responsibilities(gm, x, centers, s2);
  NoisePred eps(x.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] == 0.0) continue;
    const double c = r[i] / s2[i];
    for (std::size_t j = 0; j < x.size(); ++j) eps[j] += c * (x[j] - centers[i][j]);
  }
  const double noise = std::sqrt(1.0 - abar);
  for (double& e : eps) e *= noise;
  return eps;
}

NoisePred eps_oracle(const GaussianMixture& gm, const NoiseSchedule& s, const StateVec& x,
                     int t) {
  return eps_at(gm, x, s.alpha_at(t));
}

StateVec x0_posterior_mean(const GaussianMixture& gm, const StateVec& x, double abar) {
  check_point(gm, x);
  if (!(abar > 0.0 && abar <= 1.0)) {
    fail(ErrorCode::TimestepOutOfRange, "alpha_bar must lie in (0, 1]");
  }
  if (abar == 1.0) return x;
  const double signal = std::sqrt(abar);
  const std::size_t n = gm.components();
  std::vector<StateVec> centers(n);
  std::vector<double> s2(n);
  for (std::size_t i = 0; i < n; ++i) {
    centers[i] = axpby(signal, gm.means[i], 0.0, gm.means[i]);
    s2[i] = abar * gm.variances[i] + (1.0 - abar);
  }
  const auto r = responsibilities(gm, x, centers, s2);
  StateVec mean(x.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] == 0.0) continue;
    const double gain = signal * gm.variances[i] / s2[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      mean[j] += r[i] * (gm.means[i][j] + gain * (x[j] - centers[i][j]));
    }
  }
  return mean;
}

StateVec velocity_or_limit(const GaussianMixture& gm, const StateVec& x, double sigma) {
  check_point(gm, x);
  const std::size_t n = gm.components();
  std::vector<double> s2(n);
  for (std::size_t i = 0; i < n; ++i) s2[i] = gm.variances[i] + sigma * sigma;
  const auto r = responsibilities(gm, x, gm.means, s2);
  // (x - x0_hat) / sigma = sigma * sum_i r_i (x - m_i) / (v_i + sigma^2)
  StateVec v(x.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] == 0.0) continue;
    const double c = r[i] * sigma / s2[i];
    for (std::size_t j = 0; j < x.size(); ++j) v[j] += c * (x[j] - gm.means[i][j]);
  }
  return v;
}

StateVec velocity_oracle(const GaussianMixture& gm, const StateVec& x, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::NonPositiveSigma, "velocity needs sigma > 0");
  return velocity_or_limit(gm, x, sigma);
}

NoisePred state_independent_eps(std::uint64_t seed, int t, std::size_t dim) {
  NoisePred eps(dim);
  fill_normals(seed, static_cast<std::uint32_t>(t), kStateIndependentDomain, eps);
  return eps;
}

std::vector<StateVec> draw_samples(const GaussianMixture& gm, std::size_t count,
                                   std::uint64_t seed) {
  gm.validate();
  std::vector<double> cumulative(gm.components());
  double acc = 0.0;
  for (std::size_t i = 0; i < gm.components(); ++i) cumulative[i] = (acc += gm.weights[i]);
  const std::uint64_t key = mix64(seed);
  std::vector<StateVec> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const auto lane = static_cast<std::uint32_t>(s);
    const auto bits = philox4x32({0u, lane, kMixtureComponentDomain, 0u},
                                 {static_cast<std::uint32_t>(key),
                                  static_cast<std::uint32_t>(key >> 32)});
    const double u = static_cast<double>((static_cast<std::uint64_t>(bits[0]) << 32 | bits[1]) >> 11) *
                     0x1.0p-53 * acc;
    const std::size_t comp = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const std::size_t c = std::min(comp, gm.components() - 1);
    StateVec x(gm.dim());
    fill_normals(key, lane, kMixtureNoiseDomain, x);
    const double sd = std::sqrt(gm.variances[c]);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = gm.means[c][j] + sd * x[j];
    out.push_back(std::move(x));
  }
  return out;
}

void LatencyModel::validate() const {
  check(eval_time_ms >= 0.0 && std::isfinite(eval_time_ms), ErrorCode::InvalidLatencyModel,
        "eval_time_ms must be finite and nonnegative");
  check(dispatch_overhead_ms >= 0.0 && std::isfinite(dispatch_overhead_ms),
        ErrorCode::InvalidLatencyModel, "dispatch_overhead_ms must be finite and nonnegative");
}

Denoiser Denoiser::analytic(GaussianMixture gm) {
  gm.validate();
  return Denoiser(AnalyticEps{std::move(gm)});
}

Denoiser Denoiser::state_independent(std::uint64_t seed) {
  return Denoiser(StateIndependent{seed});
}

Denoiser Denoiser::perturbed(Denoiser inner, double scale) {
  check(scale >= 0.0 && std::isfinite(scale), ErrorCode::ConfigError,
        "perturbation scale must be finite and nonnegative");
  return Denoiser(Perturbed{std::make_shared<const Denoiser>(std::move(inner)), scale});
}

Denoiser Denoiser::with_latency(Denoiser inner, LatencyModel model) {
  model.validate();
  return Denoiser(Latency{std::make_shared<const Denoiser>(std::move(inner)), model});
}

NoisePred Denoiser::evaluate(const NoiseSchedule& s, const StateVec& x, int t,
                             EvalContext* ctx) const {
  if (t < 0 || t > s.steps()) {
    fail(ErrorCode::TimestepOutOfRange, "denoiser evaluated at t=" + std::to_string(t));
  }
  auto eps = eval_node(s, x, t, ctx);
  if (ctx != nullptr) ++ctx->evaluations;
  return eps;
}

NoisePred Denoiser::eval_node(const NoiseSchedule& s, const StateVec& x, int t,
                              EvalContext* ctx) const {
  struct Visitor {
    const NoiseSchedule& s;
    const StateVec& x;
    int t;
    EvalContext* ctx;

    NoisePred operator()(const AnalyticEps& n) const { return eps_oracle(n.gm, s, x, t); }

    NoisePred operator()(const StateIndependent& n) const {
      return state_independent_eps(n.seed, t, x.size());
    }

    NoisePred operator()(const Perturbed& n) const {
      NoisePred eps = n.inner->eval_node(s, x, t, ctx);
      if (n.scale == 0.0) return eps;
      // Key the pseudo-noise on x quantized to 2^-24 so it is reproducible.
      std::uint64_t key = mix64(static_cast<std::uint64_t>(t));
      for (double v : x) {
        const double q = std::clamp(std::round(v * 0x1.0p24), -0x1.0p62, 0x1.0p62);
        key = mix64(key ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(q)));
      }
      NoisePred noise(eps.size());
      fill_normals(key, static_cast<std::uint32_t>(t), kPerturbDomain, noise);
      for (std::size_t j = 0; j < eps.size(); ++j) eps[j] += n.scale * noise[j];
      return eps;
    }

    NoisePred operator()(const Latency& n) const {
      if (n.model.clock == ClockMode::Real) {
        std::this_thread::sleep_for(
            std::chrono::duration<double, std::milli>(n.model.eval_time_ms));
      } else if (ctx != nullptr) {
        ctx->virtual_ms += n.model.eval_time_ms;
      }
      return n.inner->eval_node(s, x, t, ctx);
    }
  };
  return std::visit(Visitor{s, x, t, ctx}, node_);
}

double Denoiser::dispatch_overhead_ms() const {
  if (const auto* p = std::get_if<Perturbed>(&node_)) return p->inner->dispatch_overhead_ms();
  if (const auto* l = std::get_if<Latency>(&node_)) {
    return l->model.dispatch_overhead_ms + l->inner->dispatch_overhead_ms();
  }
  return 0.0;
}

bool Denoiser::uses_virtual_clock() const {
  if (const auto* p = std::get_if<Perturbed>(&node_)) return p->inner->uses_virtual_clock();
  if (const auto* l = std::get_if<Latency>(&node_)) {
    return l->model.clock == ClockMode::Virtual || l->inner->uses_virtual_clock();
  }
  return false;
}

const GaussianMixture* Denoiser::mixture() const {
  if (const auto* a = std::get_if<AnalyticEps>(&node_)) return &a->gm;
  if (const auto* p = std::get_if<Perturbed>(&node_)) return p->inner->mixture();
  if (const auto* l = std::get_if<Latency>(&node_)) return l->inner->mixture();
  return nullptr;
}

std::string Denoiser::describe() const {
  std::ostringstream out;
  std::visit(
      [&out](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, AnalyticEps>) {
          out << "analytic(components=" << n.gm.components() << ", dim=" << n.gm.dim() << ")";
        } else if constexpr (std::is_same_v<N, StateIndependent>) {
          out << "state_independent(seed=" << n.seed << ")";
        } else if constexpr (std::is_same_v<N, Perturbed>) {
          out << "perturbed(" << n.inner->describe() << ", scale=" << n.scale << ")";
        } else {
          out << "latency(" << n.inner->describe() << ", eval_ms=" << n.model.eval_time_ms
              << ", overhead_ms=" << n.model.dispatch_overhead_ms
              << (n.model.clock == ClockMode::Virtual ? ", virtual" : "") << ")";
        }
      },
      node_);
  return out.str();
}

}  // namespace skipdiff
