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
#include <string>
#include <vector>

#include "skipdiff/report.hpp"
#include "skipdiff/vector.hpp"

namespace skipdiff {

struct SampleSet {
  std::vector<StateVec> samples;
  std::string label;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t dim() const noexcept { return samples.empty() ? 0 : samples.front().size(); }
  // EmptySet when there are no samples, DimensionMismatch on ragged rows.
  void validate() const;
};

// Unit direction used by sliced_w2 for projection `index`.
StateVec projection_direction(std::uint64_t seed, std::size_t index, std::size_t dim);

// Mean over `projections` random directions of the squared 1-D W2 distance
// between the projected empirical distributions. Sorted samples are paired
// quantile by quantile at min(|a|, |b|) levels.
double sliced_w2(const SampleSet& a, const SampleSet& b, std::size_t projections,
                 std::uint64_t seed);

// Unbiased MMD^2 with kernel exp(-|u - v|^2 / (2 bandwidth^2)).
double mmd_gaussian(const SampleSet& a, const SampleSet& b, double bandwidth);

// `quantile` of the MMD^2 null distribution obtained by re-splitting a u b at
// random `permutations` times.
double mmd_permutation_threshold(const SampleSet& a, const SampleSet& b, double bandwidth,
                                 std::size_t permutations, double quantile,
                                 std::uint64_t seed);

// Max Euclidean distance between states at matching timesteps. The timestep
// lists must agree (TimestepMismatch otherwise).
double trajectory_max_dev(const Trajectory& a, const Trajectory& b);

}  // namespace skipdiff
