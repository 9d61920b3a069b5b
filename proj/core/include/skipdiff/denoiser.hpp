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
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "skipdiff/schedule.hpp"
#include "skipdiff/vector.hpp"

namespace skipdiff {

// Isotropic Gaussian mixture used as the data distribution p_0. Every quantity
// a sampler needs (epsilon, posterior mean, ODE velocity) has a closed form.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<StateVec> means;
  std::vector<double> variances;  // one isotropic variance per component

  std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }
  std::size_t components() const noexcept { return weights.size(); }

  // Throws InvalidMixture unless weights are nonnegative and sum to 1 within
  // 1e-12, means share one positive dimension and variances are positive.
  void validate() const;

  static GaussianMixture standard_normal(std::size_t dim);
};

// Bayes-optimal noise prediction under the variance-preserving forward process
// at noise level `abar`: eps* = -sqrt(1 - abar) * grad log p_abar(x).
NoisePred eps_at(const GaussianMixture& gm, const StateVec& x, double abar);

// eps_at at abar = alpha_bar(t). Accepts 0 <= t <= T; at t = 0 the result is
// the zero vector (the clean-data limit).
NoisePred eps_oracle(const GaussianMixture& gm, const NoiseSchedule& s,
                     const StateVec& x, int t);

// E[x_0 | x_t = x] under the variance-preserving forward process.
StateVec x0_posterior_mean(const GaussianMixture& gm, const StateVec& x, double abar);

// Probability-flow velocity dx/dsigma = (x - E[x_0 | x_sigma = x]) / sigma for
// the variance-exploding process x_sigma = x_0 + sigma * e. Requires sigma > 0.
StateVec velocity_oracle(const GaussianMixture& gm, const StateVec& x, double sigma);

// Same as velocity_oracle but defined at sigma = 0 as its limit (zero).
StateVec velocity_or_limit(const GaussianMixture& gm, const StateVec& x, double sigma);

// Deterministic, state-free noise prediction keyed only by (seed, t, dim).
NoisePred state_independent_eps(std::uint64_t seed, int t, std::size_t dim);

// `count` i.i.d. draws from the mixture, a pure function of (gm, count, seed).
std::vector<StateVec> draw_samples(const GaussianMixture& gm, std::size_t count,
                                   std::uint64_t seed);

enum class ClockMode { Real, Virtual };

// Simulated network cost. In Real mode an evaluation sleeps eval_time_ms; in
// Virtual mode it only adds eval_time_ms to the caller's EvalContext.
struct LatencyModel {
  double eval_time_ms = 0.0;
  double dispatch_overhead_ms = 0.0;
  ClockMode clock = ClockMode::Real;

  void validate() const;
};

// Per-task accumulator owned by the caller; never shared between workers.
struct EvalContext {
  double virtual_ms = 0.0;
  std::size_t evaluations = 0;
};

// The noise predictor the samplers call. A small immutable expression tree:
// leaves are oracles, inner nodes are wrappers. Copies share subtrees, and
// evaluate() is safe to call concurrently on one instance.
class Denoiser {
 public:
  static Denoiser analytic(GaussianMixture gm);
  static Denoiser state_independent(std::uint64_t seed);
  // Adds scale * N(0, I) pseudo-noise keyed by (quantized x, t).
  static Denoiser perturbed(Denoiser inner, double scale);
  static Denoiser with_latency(Denoiser inner, LatencyModel model);

  NoisePred evaluate(const NoiseSchedule& s, const StateVec& x, int t,
                     EvalContext* ctx = nullptr) const;

  // Sum of dispatch overheads of all latency wrappers in the tree.
  double dispatch_overhead_ms() const;
  bool uses_virtual_clock() const;
  // The mixture behind an analytic leaf, if there is one.
  const GaussianMixture* mixture() const;
  std::string describe() const;

 private:
  struct AnalyticEps {
    GaussianMixture gm;
  };
  struct StateIndependent {
    std::uint64_t seed;
  };
  struct Perturbed {
    std::shared_ptr<const Denoiser> inner;
    double scale;
  };
  struct Latency {
    std::shared_ptr<const Denoiser> inner;
    LatencyModel model;
  };
  using Node = std::variant<AnalyticEps, StateIndependent, Perturbed, Latency>;

  explicit Denoiser(Node node) : node_(std::move(node)) {}
  NoisePred eval_node(const NoiseSchedule& s, const StateVec& x, int t,
                      EvalContext* ctx) const;

  Node node_;
};

inline NoisePred evaluate(const Denoiser& d, const NoiseSchedule& s, const StateVec& x,
                          int t, EvalContext* ctx = nullptr) {
  return d.evaluate(s, x, t, ctx);
}

}  // namespace skipdiff
