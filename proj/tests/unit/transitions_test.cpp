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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/error.hpp"
#include "skipdiff/schedule.hpp"
#include "skipdiff/transitions.hpp"

namespace skipdiff {
namespace {

// Schedule whose alpha_bar at t = 2 is 0.25 and at t = 1 is 0.5.
NoiseSchedule halving_schedule() { return build_linear_beta(4, 0.5, 0.5); }

template <typename Fn>
void expect_code(ErrorCode code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(DdpmSkipTest, ScalarPosterior) {
  const auto post = ddpm_skip_posterior(halving_schedule(), 2, 1, {1.0}, {2.0});
  EXPECT_NEAR(post.mean[0], 1.41421356237309505, 1e-15);
  EXPECT_NEAR(post.variance, 1.0 / 3.0, 1e-15);
}

TEST(DdpmSkipTest, ScalarSample) {
  const auto s = halving_schedule();
  EXPECT_NEAR(ddpm_skip_sample(s, 2, 1, {1.0}, {2.0}, {1.0})[0], 1.9915638315627208133, 1e-15);
  EXPECT_EQ(ddpm_skip_sample(s, 2, 1, {1.0}, {2.0}, {0.0}),
            ddpm_skip_posterior(s, 2, 1, {1.0}, {2.0}).mean);
}

TEST(DdpmSkipTest, FullSkipIsClean) {
  const auto s = build_linear_beta(20, 1e-3, 0.2);
  const StateVec x_t{0.4, -1.7}, x0{1.25, 3.5};
  for (int t = 1; t <= 20; ++t) {
    const auto post = ddpm_skip_posterior(s, t, t, x_t, x0);
    EXPECT_EQ(post.mean, x0);
    EXPECT_EQ(post.variance, 0.0);
    EXPECT_EQ(ddpm_skip_sample(s, t, t, x_t, x0, {9.0, 9.0}), x0);
    EXPECT_EQ(ddpm_skip_sample(s, t, t, x_t, x0, {}), x0);
  }
}

TEST(DdpmSkipTest, UnitStepMatchesTextbookPosterior) {
  for (const auto& s : {halving_schedule(), build_linear_beta(50, 0.002, 0.4),
                        build_cosine(30, 0.008)}) {
    for (int t = 1; t <= s.steps(); ++t) {
      const double ab = s.alpha_at(t), ab_prev = s.alpha_at(t - 1), beta = s.beta_at(t);
      const double x_t = 0.8, x0 = -1.3;
      const double mean = std::sqrt(ab_prev) * beta / (1 - ab) * x0 +
                          std::sqrt(1 - beta) * (1 - ab_prev) / (1 - ab) * x_t;
      const double var = beta * (1 - ab_prev) / (1 - ab);
      const auto post = ddpm_skip_posterior(s, t, 1, {x_t}, {x0});
      EXPECT_NEAR(post.mean[0], mean, 1e-12 * std::max(1.0, std::abs(mean))) << t;
      EXPECT_NEAR(post.variance, var, 1e-12 * std::max(var, 1e-300) + 1e-300) << t;
    }
  }
}

TEST(DdimSkipTest, ScalarExample) {
  const double from = 0.25, to = 0.81;
  const auto c = ddim_coeffs(from, to, 0.0);
  EXPECT_NEAR(c.kappa, 0.50332229568471664648, 1e-15);
  EXPECT_NEAR(c.lambda, 0.64833885215764167676, 1e-15);
  EXPECT_EQ(c.sigma, 0.0);
  EXPECT_NEAR(ddim_update(from, to, {1.0}, {0.5}, 0.0, {})[0], 1.2385220837710388955, 1e-15);
}

TEST(DdimSkipTest, DdpmInducedSigmaMatchesPosteriorVariance) {
  const auto c = ddim_skip_coeffs(halving_schedule(), 2, 1, VarianceRule::ddpm_induced());
  EXPECT_NEAR(c.sigma * c.sigma, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.kappa * c.kappa * 0.75 + c.sigma * c.sigma, 0.5, 1e-12);
  EXPECT_NEAR(c.lambda + c.kappa * 0.5, std::sqrt(0.5), 1e-12);
}

TEST(DdimSkipTest, EqualNoiseLevelIsIdentity) {
  const StateVec x{0.3, -2.0};
  const auto out = ddim_update(0.4, 0.4, x, {1.1, 0.2}, 0.0, {});
  for (std::size_t j = 0; j < x.size(); ++j) EXPECT_NEAR(out[j], x[j], 1e-15);
}

TEST(DdimSkipTest, SkipToCleanReturnsPrediction) {
  const auto s = build_linear_beta(20, 1e-3, 0.2);
  const StateVec x{0.3, -2.0};
  const NoisePred eps{1.1, 0.2};
  for (int t = 1; t <= 20; ++t) {
    EXPECT_EQ(ddim_skip(s, t, t, x, eps, VarianceRule::deterministic(), {}),
              predict_x0(s.alpha_at(t), x, eps));
  }
}

TEST(DdimSkipTest, UnitStepMatchesStandardUpdate) {
  const auto s = build_linear_beta(50, 0.002, 0.4);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int t = 1; t <= 50; ++t) {
    const StateVec x{normal(rng), normal(rng)};
    const NoisePred eps{normal(rng), normal(rng)};
    const double ab = s.alpha_at(t), prev = s.alpha_at(t - 1);
    StateVec expected(2);
    for (int j = 0; j < 2; ++j) {
      const double x0 = (x[j] - std::sqrt(1.0 - ab) * eps[j]) / std::sqrt(ab);
      expected[j] = std::sqrt(prev) * x0 + std::sqrt(1.0 - prev) * eps[j];
    }
    EXPECT_EQ(ddim_skip(s, t, 1, x, eps, VarianceRule::deterministic(), {}), expected);
  }
}

TEST(DdimSkipTest, VarianceRules) {
  const auto s = build_linear_beta(50, 0.002, 0.4);
  const double full = ddim_skip_coeffs(s, 30, 5, VarianceRule::ddpm_induced()).sigma;
  EXPECT_GT(full, 0.0);
  EXPECT_DOUBLE_EQ(ddim_skip_coeffs(s, 30, 5, VarianceRule::with_eta(0.5)).sigma, 0.5 * full);
  EXPECT_EQ(ddim_skip_coeffs(s, 30, 5, VarianceRule::deterministic()).sigma, 0.0);
  expect_code(ErrorCode::InvalidVarianceRule,
              [&] { ddim_skip_coeffs(s, 30, 5, VarianceRule::with_eta(1.5)); });
  EXPECT_EQ(VarianceRule::with_eta(0.25).describe(), "eta:0.25");
}

TEST(DdimSkipTest, ErrorPaths) {
  const auto s = halving_schedule();
  expect_code(ErrorCode::VarianceTooLarge, [] { ddim_coeffs(0.25, 0.5, 0.9); });
  expect_code(ErrorCode::InvalidSkip, [&] { check_skip(s, 2, 0); });
  expect_code(ErrorCode::TimestepOutOfRange, [&] { check_skip(s, 2, 3); });
  expect_code(ErrorCode::TimestepOutOfRange, [&] { check_skip(s, 5, 1); });
  expect_code(ErrorCode::DimensionMismatch,
              [&] { ddim_skip(s, 2, 1, {1.0, 2.0}, {1.0}, VarianceRule::deterministic(), {}); });
  expect_code(ErrorCode::DimensionMismatch, [&] {
    ddim_skip(s, 2, 1, {1.0}, {1.0}, VarianceRule::ddpm_induced(), {});
  });
}

TEST(CoefficientTest, ConstraintsHoldOnRandomTuples) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> pick_steps(1, 200);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int steps = pick_steps(rng);
    const auto s = trial % 2 ? build_cosine(steps, 0.008) : default_schedule(steps);
    const int t = 1 + static_cast<int>(unit(rng) * steps) % steps;
    const int k = 1 + static_cast<int>(unit(rng) * t) % t;
    VarianceRule rule = VarianceRule::deterministic();
    if (trial % 3 == 1) rule = VarianceRule::ddpm_induced();
    if (trial % 3 == 2) rule = VarianceRule::with_eta(unit(rng));
    const auto c = ddim_skip_coeffs(s, t, k, rule);
    const double from = s.alpha_at(t), to = s.alpha_at(t - k);
    EXPECT_NEAR(c.kappa * c.kappa * (1 - from) + c.sigma * c.sigma, 1 - to, 1e-10);
    EXPECT_NEAR(c.lambda + c.kappa * std::sqrt(from), std::sqrt(to), 1e-10);
    EXPECT_GE(c.sigma, 0.0);
  }
}

// Forward-noise a fixed x0 to level t, apply one skip to t - k, and compare
// the empirical moments with the forward marginal at t - k.
void check_marginal(const NoiseSchedule& s, int t, int k, bool ddim, std::uint64_t seed) {
  constexpr int kDraws = 100000;
  const double x0 = 1.5;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double from = s.alpha_at(t), to = s.alpha_at(t - k);
  double sum = 0.0, sum2 = 0.0;
  for (int n = 0; n < kDraws; ++n) {
    const double noise = normal(rng);
    const StateVec x_t{std::sqrt(from) * x0 + std::sqrt(1 - from) * noise};
    const StateVec z{normal(rng)};
    // The exact noise is known here, so the x0 estimate is exact as well.
    const double y = ddim ? ddim_skip(s, t, k, x_t, {noise}, VarianceRule::ddpm_induced(), z)[0]
                          : ddpm_skip_sample(s, t, k, x_t, {x0}, z)[0];
    sum += y;
    sum2 += y * y;
  }
  const double mean = sum / kDraws;
  const double var = (sum2 - kDraws * mean * mean) / (kDraws - 1);
  const double target_var = 1 - to;
  EXPECT_LT(std::abs(mean - std::sqrt(to) * x0), 4 * std::sqrt(target_var / kDraws))
      << "t=" << t << " k=" << k;
  EXPECT_LT(std::abs(var - target_var), 4 * target_var * std::sqrt(2.0 / (kDraws - 1)))
      << "t=" << t << " k=" << k;
}

TEST(MarginalTest, SkipTransitionsPreserveForwardMarginals) {
  const auto s = default_schedule(50);
  const std::pair<int, int> cases[] = {{50, 1}, {50, 10}, {37, 5}, {20, 19}, {3, 2}, {12, 4}};
  std::uint64_t seed = 100;
  for (auto [t, k] : cases) {
    check_marginal(s, t, k, false, ++seed);
    check_marginal(s, t, k, true, ++seed);
  }
}

// Max deviation, over anchors, between one k-skip and k unit steps of
// deterministic DDIM driven by the exact standard-normal oracle.
double skip_vs_compose(int steps, int k) {
  const auto s = default_schedule(steps);
  const auto gm = GaussianMixture::standard_normal(1);
  double worst = 0.0;
  for (int t = k; t <= steps; ++t) {
    const StateVec x{1.0};
    const auto skipped =
        ddim_skip(s, t, k, x, eps_oracle(gm, s, x, t), VarianceRule::deterministic(), {});
    StateVec y = x;
    for (int u = t; u > t - k; --u) {
      y = ddim_skip(s, u, 1, y, eps_oracle(gm, s, y, u), VarianceRule::deterministic(), {});
    }
    worst = std::max(worst, std::abs(skipped[0] - y[0]));
  }
  return worst;
}

TEST(SkipVsComposeTest, DeviationShrinksWithFinerSchedules) {
  const double d25 = skip_vs_compose(25, 5);
  const double d50 = skip_vs_compose(50, 5);
  const double d100 = skip_vs_compose(100, 5);
  EXPECT_GT(d25, 0.0);
  EXPECT_LE(d50, d25);
  EXPECT_LE(d100, d50);
}

TEST(EulerSkipTest, Examples) {
  const auto g = SigmaGrid::from_values({1.0, 0.7, 0.4, 0.0});
  EXPECT_DOUBLE_EQ(euler_skip(g, 0, 2, {1.0}, {2.0})[0], -0.2);
  const auto h = SigmaGrid::from_values({1.5, 0.5, 0.0});
  EXPECT_EQ(euler_skip(h, 0, 2, {3.0}, {2.0})[0], 0.0);
  EXPECT_EQ(euler_skip(g, 1, 2, {3.0, 4.0}, {0.0, 0.0}), (StateVec{3.0, 4.0}));
}

TEST(EulerSkipTest, UnitStepIsPlainEuler) {
  const auto g = build_sigma_grid(16, 0.002, 80.0, 7.0);
  for (int i = 0; i < 16; ++i) {
    const StateVec x{0.5 * i, -1.0}, v{0.25, 3.0 / (i + 1)};
    StateVec expected(2);
    for (int j = 0; j < 2; ++j) expected[j] = x[j] + (g.sigma_at(i + 1) - g.sigma_at(i)) * v[j];
    EXPECT_EQ(euler_skip(g, i, 1, x, v), expected);
  }
}

TEST(EulerSkipTest, ErrorPaths) {
  const auto g = build_sigma_grid(4, 0.002, 80.0, 7.0);
  expect_code(ErrorCode::IndexOutOfRange, [&] { euler_skip(g, 3, 2, {1.0}, {1.0}); });
  expect_code(ErrorCode::IndexOutOfRange, [&] { euler_skip(g, 0, 0, {1.0}, {1.0}); });
  expect_code(ErrorCode::DimensionMismatch, [&] { euler_skip(g, 0, 1, {1.0}, {1.0, 2.0}); });
}

}  // namespace
}  // namespace skipdiff
