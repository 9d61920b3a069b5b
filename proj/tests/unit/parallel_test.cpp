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

#include <algorithm>
#include <atomic>
#include <cmath>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/error.hpp"
#include "skipdiff/metrics.hpp"
#include "skipdiff/parallel.hpp"
#include "skipdiff/sequential.hpp"

namespace skipdiff {
namespace {

void expect_same_states(const Trajectory& a, const Trajectory& b) {
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    EXPECT_EQ(a.states[i].t, b.states[i].t);
    EXPECT_EQ(a.states[i].x, b.states[i].x) << "t=" << a.states[i].t;
  }
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

TEST(PlanBlocksTest, AggressiveExample) {
  const auto plan = plan_blocks(10, 3, ParallelMode::Aggressive);
  EXPECT_EQ(plan.blocks, (std::vector<Block>{{10, 3}, {7, 3}, {4, 3}, {1, 1}}));
  EXPECT_EQ(plan.total_evals, 11);
  EXPECT_EQ(plan.total_rounds, 5);
}

TEST(PlanBlocksTest, ConservativeExample) {
  const auto plan = plan_blocks(10, 3, ParallelMode::Conservative);
  EXPECT_EQ(plan.blocks, (std::vector<Block>{{10, 3}, {6, 3}, {2, 1}}));
  EXPECT_EQ(plan.total_evals, 10);
  EXPECT_EQ(plan.total_rounds, 6);
}

TEST(PlanBlocksTest, SingleDevice) {
  const auto agg = plan_blocks(8, 1, ParallelMode::Aggressive);
  EXPECT_EQ(agg.total_evals, 9);
  EXPECT_EQ(agg.total_rounds, 9);
  const auto con = plan_blocks(8, 1, ParallelMode::Conservative);
  EXPECT_EQ(con.blocks.size(), 4u);
  EXPECT_EQ(con.total_evals, 8);
  EXPECT_EQ(con.total_rounds, 8);
  for (const auto& b : con.blocks) EXPECT_EQ(b.k, 1);
}

TEST(PlanBlocksTest, TrailingStepBorrowsDraft) {
  const auto plan = plan_blocks(9, 3, ParallelMode::Conservative);
  EXPECT_EQ(plan.blocks, (std::vector<Block>{{9, 3}, {5, 2}, {2, 1}}));
  EXPECT_EQ(plan.total_rounds, 6);
  const auto lone = plan_blocks(3, 1, ParallelMode::Conservative);
  EXPECT_EQ(lone.blocks, (std::vector<Block>{{3, 1}, {1, 0}}));
  EXPECT_EQ(lone.total_evals, 3);
  EXPECT_EQ(lone.total_rounds, 3);
}

TEST(PlanBlocksTest, PartitionAndLaws) {
  for (int steps = 1; steps <= 60; ++steps) {
    for (int d = 1; d <= 6; ++d) {
      const auto agg = plan_blocks(steps, d, ParallelMode::Aggressive);
      int t = steps;
      for (const auto& b : agg.blocks) {
        EXPECT_EQ(b.anchor_t, t);
        EXPECT_GE(b.k, 1);
        EXPECT_LE(b.k, d);
        t -= b.k;
      }
      EXPECT_EQ(t, 0);
      EXPECT_EQ(agg.total_evals, steps + 1);
      EXPECT_EQ(agg.total_rounds, 1 + ceil_div(steps, d));

      const auto con = plan_blocks(steps, d, ParallelMode::Conservative);
      t = steps;
      for (const auto& b : con.blocks) {
        EXPECT_EQ(b.anchor_t, t);
        EXPECT_LE(b.k, d);
        t -= b.k + 1;
      }
      EXPECT_EQ(t, 0);
      EXPECT_EQ(con.total_evals, steps);
      // A lone step (T = 1, or odd T with one device) is a single round.
      if (steps >= 2 && (d >= 2 || steps % 2 == 0)) {
        EXPECT_EQ(con.total_rounds, 2 * ceil_div(steps, d + 1)) << steps << "," << d;
      }
    }
  }
}

TEST(PlanBlocksTest, RecomputeAblationAccounting) {
  const auto plan = plan_blocks(10, 3, ParallelMode::Aggressive, true);
  EXPECT_EQ(plan.total_evals, 11 + 3);
  EXPECT_EQ(plan.total_rounds, 5 + 3);
  EXPECT_FALSE(plan_blocks(10, 3, ParallelMode::Conservative, true).recompute_anchor_eps);
  EXPECT_THROW(plan_blocks(0, 3, ParallelMode::Aggressive), Error);
  EXPECT_THROW(plan_blocks(5, 0, ParallelMode::Conservative), Error);
}

struct EquivalenceCase {
  int steps;
  int devices;
  bool ddpm_rule;
};

class EquivalenceTest : public ::testing::TestWithParam<EquivalenceCase> {};

TEST_P(EquivalenceTest, StateIndependentMatchesSequential) {
  const auto [steps, devices, ddpm_rule] = GetParam();
  const auto s = default_schedule(steps);
  const auto d = Denoiser::state_independent(77);
  const VarianceRule rule = ddpm_rule ? VarianceRule::ddpm_induced() : VarianceRule::deterministic();
  const RngStream stream(steps * 10 + devices);
  const auto x_T = initial_state(stream, steps, 3);
  const auto seq = sample_ddim(s, d, x_T, rule, stream);
  const auto agg = run_aggressive(s, d, x_T, devices, rule, stream);
  const auto con = run_conservative(s, d, x_T, devices, rule, stream);
  expect_same_states(agg.trajectory, seq);
  expect_same_states(con.trajectory, seq);
}

std::vector<EquivalenceCase> equivalence_grid() {
  std::vector<EquivalenceCase> cases;
  for (int steps : {8, 20, 50}) {
    for (int devices : {1, 2, 3, 4}) {
      for (bool ddpm : {false, true}) cases.push_back({steps, devices, ddpm});
    }
  }
  return cases;
}

INSTANTIATE_TEST_SUITE_P(Grid, EquivalenceTest, ::testing::ValuesIn(equivalence_grid()));

TEST(EquivalenceFamilies, DdpmPosteriorFamily) {
  for (int steps : {7, 20}) {
    for (int devices : {1, 2, 3, 5}) {
      const auto s = default_schedule(steps);
      const auto d = Denoiser::state_independent(3);
      const RngStream stream(devices);
      const auto x_T = initial_state(stream, steps, 2);
      const auto seq = sample_ddpm(s, d, x_T, stream);
      expect_same_states(run_aggressive_ddpm(s, d, x_T, devices, stream).trajectory, seq);
      expect_same_states(run_conservative_ddpm(s, d, x_T, devices, stream).trajectory, seq);
    }
  }
}

TEST(EquivalenceFamilies, EulerFamily) {
  // A field that ignores the state makes drafting exact.
  const VelocityFn field = [](const StateVec& x, double sigma) {
    return StateVec(x.size(), std::sin(sigma) + 0.1 * sigma);
  };
  for (int n : {5, 16}) {
    for (int devices : {1, 2, 4}) {
      const auto g = build_sigma_grid(n, 0.002, 80.0, 7.0);
      const auto seq = sample_euler(g, field, {1.0, 2.0});
      expect_same_states(run_aggressive_euler(g, field, {1.0, 2.0}, devices).trajectory, seq);
      expect_same_states(run_conservative_euler(g, field, {1.0, 2.0}, devices).trajectory, seq);
    }
  }
}

TEST(AggressiveTest, FirstDraftIsStandardStep) {
  const auto gm = GaussianMixture{{0.4, 0.6}, {{-1.0}, {1.5}}, {0.2, 0.6}};
  const auto s = default_schedule(20);
  const auto d = Denoiser::analytic(gm);
  const RngStream stream(5);
  const StateVec x_T{0.8};
  for (auto rule : {VarianceRule::deterministic(), VarianceRule::ddpm_induced()}) {
    const auto run = run_aggressive(s, d, x_T, 4, rule, stream);
    const double sigma = rule_sigma(rule, s.alpha_at(20), s.alpha_at(19));
    const StateVec z = sigma > 0 ? stream.derive(19, NoiseRole::Transition, 1) : StateVec{};
    EXPECT_EQ(run.trajectory.states[1].x, ddim_skip(s, 20, 1, x_T, d.evaluate(s, x_T, 20), rule, z));
  }
}

TEST(AggressiveTest, SingleDeviceMatchesSequentialWithExactOracle) {
  const auto gm = GaussianMixture{{0.4, 0.6}, {{-1.0, 0.0}, {1.5, 1.0}}, {0.2, 0.6}};
  const auto s = default_schedule(25);
  const auto d = Denoiser::analytic(gm);
  const RngStream stream(6);
  const auto x_T = initial_state(stream, 25, 2);
  for (auto rule : {VarianceRule::deterministic(), VarianceRule::ddpm_induced()}) {
    const auto seq = sample_ddim(s, d, x_T, rule, stream);
    const auto agg = run_aggressive(s, d, x_T, 1, rule, stream);
    expect_same_states(agg.trajectory, seq);
    EXPECT_EQ(agg.trajectory.eval_count, seq.eval_count + 1);
    expect_same_states(run_conservative(s, d, x_T, 1, rule, stream).trajectory, seq);
  }
}

// Worst deviation, over anchors at unit amplitude, between one k-skip and k
// unit steps of deterministic DDIM on standard-normal data.
double compose_gap(const NoiseSchedule& s, int k) {
  const auto gm = GaussianMixture::standard_normal(1);
  double worst = 0.0;
  for (int t = k; t <= s.steps(); ++t) {
    const StateVec one{1.0};
    const auto skip =
        ddim_skip(s, t, k, one, eps_oracle(gm, s, one, t), VarianceRule::deterministic(), {});
    StateVec y = one;
    for (int u = t; u > t - k; --u) {
      y = ddim_skip(s, u, 1, y, eps_oracle(gm, s, y, u), VarianceRule::deterministic(), {});
    }
    worst = std::max(worst, std::abs(skip[0] - y[0]));
  }
  return worst;
}

TEST(AggressiveTest, ExactOracleDeviationBelowComposeGap) {
  const auto s = default_schedule(50);
  const auto d = Denoiser::analytic(GaussianMixture::standard_normal(1));
  const RngStream stream(12);
  const auto x_T = initial_state(stream, 50, 1);
  const auto seq = sample_ddim(s, d, x_T, VarianceRule::deterministic(), stream);
  const auto agg = run_aggressive(s, d, x_T, 4, VarianceRule::deterministic(), stream);
  const double dev = std::abs(seq.final_state()[0] - agg.trajectory.final_state()[0]);
  EXPECT_GT(dev, 0.0);
  EXPECT_LT(dev, compose_gap(s, 4) * std::abs(x_T[0]));
}

TEST(AggressiveTest, GoldenTrajectoryDeviation) {
  const auto s = default_schedule(50);
  const auto d = Denoiser::analytic(GaussianMixture::standard_normal(2));
  const RngStream stream(2026);
  const auto x_T = initial_state(stream, 50, 2);
  const auto seq = sample_ddim(s, d, x_T, VarianceRule::deterministic(), stream);
  const auto agg = run_aggressive(s, d, x_T, 4, VarianceRule::deterministic(), stream);
  EXPECT_NEAR(trajectory_max_dev(agg.trajectory, seq), 0.0093705435483912823, 1e-12);
}

TEST(ConservativeTest, NoWorseThanAggressiveAcrossSeeds) {
  const auto s = default_schedule(50);
  const auto d = Denoiser::analytic(GaussianMixture::standard_normal(1));
  std::vector<double> agg_dev, con_dev;
  for (int seed = 0; seed < 100; ++seed) {
    const RngStream stream(seed);
    const auto x_T = initial_state(stream, 50, 1);
    const auto seq = sample_ddim(s, d, x_T, VarianceRule::deterministic(), stream);
    const double ref = seq.final_state()[0];
    agg_dev.push_back(std::abs(
        run_aggressive(s, d, x_T, 3, VarianceRule::deterministic(), stream).trajectory.final_state()[0] - ref));
    con_dev.push_back(std::abs(
        run_conservative(s, d, x_T, 3, VarianceRule::deterministic(), stream).trajectory.final_state()[0] - ref));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_LE(median(con_dev), median(agg_dev));
}

TEST(AccountingTest, InstrumentedCountsMatchLaws) {
  for (int steps : {8, 20, 50}) {
    for (int devices : {1, 2, 3, 4}) {
      std::atomic<int> calls{0};
      const VelocityFn field = [&calls](const StateVec& x, double sigma) {
        ++calls;
        return StateVec(x.size(), sigma);
      };
      const auto g = build_sigma_grid(steps, 0.002, 80.0, 7.0);
      const auto agg = run_aggressive_euler(g, field, {0.0}, devices);
      EXPECT_EQ(calls.load(), steps + 1);
      EXPECT_EQ(agg.trajectory.eval_count, static_cast<std::size_t>(steps + 1));
      EXPECT_EQ(agg.rounds.size(), static_cast<std::size_t>(1 + ceil_div(steps, devices)));
      calls = 0;
      const auto con = run_conservative_euler(g, field, {0.0}, devices);
      EXPECT_EQ(calls.load(), steps);
      EXPECT_EQ(con.rounds.size(), static_cast<std::size_t>(2 * ceil_div(steps, devices + 1)));

      for (const auto* run : {&agg, &con}) {
        std::size_t total = 0;
        for (const auto& r : run->rounds) {
          EXPECT_LE(r.parallel_evals, static_cast<std::size_t>(devices));
          total += r.parallel_evals;
          for (const auto& span : r.worker_spans) {
            EXPECT_GE(span.start_ms, 0.0);
            EXPECT_LE(span.start_ms, span.end_ms);
            EXPECT_LE(span.end_ms, r.round_wall_ms + 1e-9);
          }
        }
        EXPECT_EQ(total, run->trajectory.eval_count);
      }
    }
  }
}

TEST(AccountingTest, VirtualClockWallTime) {
  const auto s = default_schedule(48);
  const auto d = Denoiser::with_latency(Denoiser::state_independent(1),
                                        {50.0, 1.0, ClockMode::Virtual});
  const RngStream stream(0);
  const auto agg = run_aggressive(s, d, {0.0}, 3, VarianceRule::deterministic(), stream);
  EXPECT_EQ(agg.rounds.size(), 17u);
  EXPECT_DOUBLE_EQ(agg.trajectory.wall_ms, 17 * 51.0);
  const auto con = run_conservative(s, d, {0.0}, 3, VarianceRule::deterministic(), stream);
  EXPECT_DOUBLE_EQ(con.trajectory.wall_ms, 24 * 51.0);
  const auto seq = sample_ddim(s, d, {0.0}, VarianceRule::deterministic(), stream);
  EXPECT_DOUBLE_EQ(seq.wall_ms, 48 * 50.0);
}

TEST(AccountingTest, RecomputeAnchorAblation) {
  const auto s = default_schedule(20);
  const auto d = Denoiser::analytic(GaussianMixture::standard_normal(1));
  const RngStream stream(3);
  ParallelOptions options;
  options.recompute_anchor_eps = true;
  const auto fresh = run_aggressive(s, d, {1.0}, 4, VarianceRule::deterministic(), stream, options);
  const auto cached = run_aggressive(s, d, {1.0}, 4, VarianceRule::deterministic(), stream);
  EXPECT_EQ(fresh.trajectory.eval_count, 21u + 4u);
  EXPECT_EQ(fresh.rounds.size(), 6u + 4u);
  EXPECT_NE(fresh.trajectory.final_state(), cached.trajectory.final_state());
}

TEST(InvarianceTest, WorkerCountsAndCompletionOrder) {
  const auto gm = GaussianMixture{{0.5, 0.5}, {{-1.0, 1.0}, {1.0, -1.0}}, {0.3, 0.3}};
  const auto s = default_schedule(20);
  const auto d = Denoiser::analytic(gm);
  const RngStream stream(99);
  const auto x_T = initial_state(stream, 20, 2);
  constexpr int kDevices = 4;
  for (ParallelMode mode : {ParallelMode::Aggressive, ParallelMode::Conservative}) {
    auto run = [&](const ParallelOptions& o) {
      return mode == ParallelMode::Aggressive
                 ? run_aggressive(s, d, x_T, kDevices, VarianceRule::ddpm_induced(), stream, o)
                 : run_conservative(s, d, x_T, kDevices, VarianceRule::ddpm_induced(), stream, o);
    };
    const auto reference = run({});
    for (int trial = 0; trial < 8; ++trial) {
      ParallelOptions options;
      options.workers = 1 + trial % kDevices;
      options.jitter_seed = 1000 + trial;
      expect_same_states(run(options).trajectory, reference.trajectory);
    }
  }
}

TEST(ParallelTest, SharedPoolAcrossRuns) {
  const auto s = default_schedule(16);
  const auto d = Denoiser::analytic(GaussianMixture::standard_normal(1));
  ParallelOptions options;
  options.pool = std::make_shared<WorkerPool>(2);
  const RngStream stream(1);
  const auto a = run_aggressive(s, d, {0.5}, 4, VarianceRule::deterministic(), stream, options);
  const auto b = run_aggressive(s, d, {0.5}, 4, VarianceRule::deterministic(), stream);
  expect_same_states(a.trajectory, b.trajectory);
}

}  // namespace
}  // namespace skipdiff
