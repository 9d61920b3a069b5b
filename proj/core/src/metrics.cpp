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

#include "skipdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "skipdiff/rng.hpp"

namespace skipdiff {

namespace {

constexpr std::uint32_t kProjectionDomain = 0x5E7C'0001u;

void check_pair(const SampleSet& a, const SampleSet& b) {
  a.validate();
  b.validate();
  check(a.dim() == b.dim(), ErrorCode::DimensionMismatch,
        "sample sets have dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
}

double kernel(const StateVec& u, const StateVec& v, double inv_two_bw2) {
  return std::exp(-squared_distance(u, v) * inv_two_bw2);
}

double mmd_indexed(const std::vector<const StateVec*>& a, const std::vector<const StateVec*>& b,
                   double bandwidth) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const auto self_term = [inv](const std::vector<const StateVec*>& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) acc += kernel(*s[i], *s[j], inv);
    }
    const double n = static_cast<double>(s.size());
    return 2.0 * acc / (n * (n - 1.0));
  };
  double cross = 0.0;
  for (const StateVec* u : a) {
    for (const StateVec* v : b) cross += kernel(*u, *v, inv);
  }
  cross /= static_cast<double>(a.size()) * static_cast<double>(b.size());
  return self_term(a) + self_term(b) - 2.0 * cross;
}

std::vector<const StateVec*> pointers(const SampleSet& s) {
  std::vector<const StateVec*> out;
  out.reserve(s.size());
  for (const auto& x : s.samples) out.push_back(&x);
  return out;
}

}  // namespace

void SampleSet::validate() const {
  check(!samples.empty(), ErrorCode::EmptySet, "sample set '" + label + "' is empty");
  for (const auto& s : samples) {
    check(s.size() == dim() && !s.empty(), ErrorCode::DimensionMismatch,
          "sample set '" + label + "' has ragged rows");
  }
}

StateVec projection_direction(std::uint64_t seed, std::size_t index, std::size_t dim) {
  StateVec dir(dim);
  for (std::uint32_t attempt = 0;; ++attempt) {
    fill_normals(mix64(seed ^ attempt), static_cast<std::uint32_t>(index), kProjectionDomain, dir);
    const double norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
    if (norm > 1e-12) {
      for (double& d : dir) d /= norm;
      return dir;
    }
  }
}

double sliced_w2(const SampleSet& a, const SampleSet& b, std::size_t projections,
                 std::uint64_t seed) {
  check_pair(a, b);
  check(projections >= 1, ErrorCode::ConfigError, "need at least one projection");
  const std::size_t levels = std::min(a.size(), b.size());
  const auto project = [](const SampleSet& s, const StateVec& dir) {
    std::vector<double> p(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      p[i] = std::inner_product(dir.begin(), dir.end(), s.samples[i].begin(), 0.0);
    }
    std::sort(p.begin(), p.end());
    return p;
  };
  const auto at_level = [levels](const std::vector<double>& sorted, std::size_t level) {
    return sorted[static_cast<std::size_t>((static_cast<double>(level) + 0.5) *
                                           static_cast<double>(sorted.size()) /
                                           static_cast<double>(levels))];
  };
  std::vector<double> per_projection(projections);
  for (std::size_t p = 0; p < projections; ++p) {
    const StateVec dir = projection_direction(seed, p, a.dim());
    const auto pa = project(a, dir);
    const auto pb = project(b, dir);
    double acc = 0.0;
    for (std::size_t l = 0; l < levels; ++l) {
      const double d = at_level(pa, l) - at_level(pb, l);
      acc += d * d;
    }
    per_projection[p] = acc / static_cast<double>(levels);
  }
  return std::accumulate(per_projection.begin(), per_projection.end(), 0.0) /
         static_cast<double>(projections);
}

double mmd_gaussian(const SampleSet& a, const SampleSet& b, double bandwidth) {
  check_pair(a, b);
  check(bandwidth > 0.0 && std::isfinite(bandwidth), ErrorCode::ConfigError,
        "bandwidth must be positive");
  check(a.size() >= 2 && b.size() >= 2, ErrorCode::InsufficientSamples,
        "unbiased MMD needs at least two samples per set");
  return mmd_indexed(pointers(a), pointers(b), bandwidth);
}

double mmd_permutation_threshold(const SampleSet& a, const SampleSet& b, double bandwidth,
                                 std::size_t permutations, double quantile,
                                 std::uint64_t seed) {
  mmd_gaussian(a, b, bandwidth);  // validates inputs
  check(permutations >= 1 && quantile >= 0.0 && quantile <= 1.0, ErrorCode::ConfigError,
        "need permutations >= 1 and quantile in [0, 1]");
  std::vector<const StateVec*> pooled = pointers(a);
  for (const auto& x : b.samples) pooled.push_back(&x);
  std::mt19937_64 rng(mix64(seed));
  std::vector<double> null(permutations);
  for (auto& value : null) {
    std::shuffle(pooled.begin(), pooled.end(), rng);
    const auto split = pooled.begin() + static_cast<std::ptrdiff_t>(a.size());
    value = mmd_indexed({pooled.begin(), split}, {split, pooled.end()}, bandwidth);
  }
  std::sort(null.begin(), null.end());
  const auto idx = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(permutations)));
  return null[std::min(idx == 0 ? 0 : idx - 1, permutations - 1)];
}

double trajectory_max_dev(const Trajectory& a, const Trajectory& b) {
  check(a.states.size() == b.states.size(), ErrorCode::TimestepMismatch,
        "trajectories have different lengths");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    check(a.states[i].t == b.states[i].t, ErrorCode::TimestepMismatch,
          "timestep lists differ at position " + std::to_string(i));
    check_same_dim(a.states[i].x, b.states[i].x, "trajectory state");
    worst = std::max(worst, std::sqrt(squared_distance(a.states[i].x, b.states[i].x)));
  }
  return worst;
}

}  // namespace skipdiff
