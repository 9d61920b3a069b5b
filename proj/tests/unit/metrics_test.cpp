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
#include <cmath>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/error.hpp"
#include "skipdiff/metrics.hpp"

namespace skipdiff {
namespace {

GaussianMixture mixture_2d() { return {{0.3, 0.7}, {{-1.5, 0.5}, {1.0, -0.5}}, {0.3, 0.5}}; }

SampleSet line_set(std::initializer_list<double> values) {
  SampleSet s;
  for (double v : values) s.samples.push_back({v});
  return s;
}

// Plain reference: project, sort, pair equal ranks, average.
double reference_sliced_w2(const SampleSet& a, const SampleSet& b, std::size_t projections,
                           std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t p = 0; p < projections; ++p) {
    const auto dir = projection_direction(seed, p, a.dim());
    std::vector<double> pa, pb;
    for (const auto& x : a.samples) pa.push_back(x[0] * dir[0] + x[1] * dir[1]);
    for (const auto& x : b.samples) pb.push_back(x[0] * dir[0] + x[1] * dir[1]);
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    total += acc / pa.size();
  }
  return total / projections;
}

TEST(SlicedW2Test, IdenticalSetsAreZero) {
  const SampleSet a{draw_samples(mixture_2d(), 500, 1), "a"};
  EXPECT_EQ(sliced_w2(a, a, 32, 4), 0.0);
}

TEST(SlicedW2Test, RigidShift) {
  SampleSet zeros, ones;
  for (int i = 0; i < 100; ++i) {
    zeros.samples.push_back({0.0});
    ones.samples.push_back({1.0});
  }
  EXPECT_DOUBLE_EQ(sliced_w2(zeros, ones, 1, 0), 1.0);
}

TEST(SlicedW2Test, MatchesReferenceAndIsSymmetric) {
  const SampleSet a{draw_samples(mixture_2d(), 10000, 1), "a"};
  const SampleSet b{draw_samples(mixture_2d(), 10000, 2), "b"};
  const double value = sliced_w2(a, b, 50, 7);
  EXPECT_NEAR(value, reference_sliced_w2(a, b, 50, 7), 1e-9);
  EXPECT_NEAR(value, sliced_w2(b, a, 50, 7), 1e-15);
  EXPECT_GT(value, 0.0);
}

TEST(SlicedW2Test, UnitDirections) {
  for (std::size_t i = 0; i < 20; ++i) {
    const auto dir = projection_direction(3, i, 5);
    double norm = 0.0;
    for (double v : dir) norm += v * v;
    EXPECT_NEAR(norm, 1.0, 1e-14);
  }
}

TEST(SlicedW2Test, Errors) {
  const SampleSet empty;
  const auto one = line_set({1.0});
  SampleSet two_d;
  two_d.samples.push_back({1.0, 2.0});
  EXPECT_THROW(sliced_w2(empty, one, 4, 0), Error);
  try {
    sliced_w2(one, two_d, 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

double gauss(double d, double bw) { return std::exp(-d * d / (2 * bw * bw)); }

TEST(MmdTest, SeparatedFourPointSets) {
  const double bw = 0.7;
  const auto a = line_set({0.0, 0.3, 0.5, 1.1});
  const auto b = line_set({7.0, 7.3, 7.5, 8.1});  // a shifted by 10 bandwidths
  double within = 0.0, cross = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double ai = a.samples[i][0], aj = a.samples[j][0];
      if (i != j) within += 2 * gauss(ai - aj, bw);  // both sets share the same spacing
      cross += gauss(ai - b.samples[j][0], bw);
    }
  }
  const double expected = within / 12.0 - 2 * cross / 16.0;
  EXPECT_NEAR(mmd_gaussian(a, b, bw), expected, 1e-6);
  EXPECT_NEAR(mmd_gaussian(a, b, bw), mmd_gaussian(b, a, bw), 1e-15);
}

TEST(MmdTest, HugeBandwidthVanishes) {
  const SampleSet a{draw_samples(mixture_2d(), 200, 1), "a"};
  const SampleSet b{draw_samples(mixture_2d(), 200, 2), "b"};
  EXPECT_NEAR(mmd_gaussian(a, b, 1e6), 0.0, 1e-9);
}

TEST(MmdTest, InsufficientSamples) {
  try {
    mmd_gaussian(line_set({1.0}), line_set({1.0, 2.0}), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSamples);
  }
}

TEST(MmdTest, SelfComparisonBelowNullThreshold) {
  const SampleSet a{draw_samples(mixture_2d(), 300, 11), "a"};
  const double threshold = mmd_permutation_threshold(a, a, 1.0, 200, 0.95, 5);
  EXPECT_LE(std::abs(mmd_gaussian(a, a, 1.0)), threshold);
}

TEST(MmdTest, PermutationNullAcceptance) {
  int accepted = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto pool = draw_samples(mixture_2d(), 200, 100 + trial);
    SampleSet a, b;
    a.samples.assign(pool.begin(), pool.begin() + 100);
    b.samples.assign(pool.begin() + 100, pool.end());
    const double threshold = mmd_permutation_threshold(a, b, 1.0, 100, 0.95, trial);
    if (mmd_gaussian(a, b, 1.0) <= threshold) ++accepted;
  }
  EXPECT_GE(accepted, 45);
}

TEST(MmdTest, DetectsShift) {
  const SampleSet a{draw_samples(mixture_2d(), 200, 1), "a"};
  SampleSet b{draw_samples(mixture_2d(), 200, 2), "b"};
  for (auto& x : b.samples) x[0] += 1.0;
  EXPECT_GT(mmd_gaussian(a, b, 1.0), mmd_permutation_threshold(a, b, 1.0, 100, 0.95, 3));
}

Trajectory make_traj(std::vector<StateVec> xs) {
  Trajectory traj;
  int t = static_cast<int>(xs.size()) - 1;
  for (auto& x : xs) traj.states.push_back({t--, std::move(x)});
  return traj;
}

TEST(TrajectoryDevTest, Basics) {
  const auto a = make_traj({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}});
  EXPECT_EQ(trajectory_max_dev(a, a), 0.0);
  auto b = a;
  b.states[1].x = {4.0, 5.0};
  EXPECT_DOUBLE_EQ(trajectory_max_dev(a, b), 5.0);
  const auto short_traj = make_traj({{0.0, 0.0}, {1.0, 1.0}});
  try {
    trajectory_max_dev(a, short_traj);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TimestepMismatch);
  }
}

TEST(TrajectoryDevTest, TriangleBound) {
  const auto pts = draw_samples(mixture_2d(), 32, 4);
  for (int rep = 0; rep < 10; ++rep) {
    auto a = make_traj({pts[rep], pts[rep + 1]});
    auto b = make_traj({pts[rep + 10], pts[rep + 11]});
    auto c = make_traj({pts[rep + 20], pts[rep + 21]});
    EXPECT_LE(trajectory_max_dev(a, c), trajectory_max_dev(a, b) + trajectory_max_dev(b, c) + 1e-12);
  }
}

}  // namespace
}  // namespace skipdiff
