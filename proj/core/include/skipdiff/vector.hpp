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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "skipdiff/error.hpp"

namespace skipdiff {

// A diffusion state x_t, a clean sample x_0, or a draft.
using StateVec = std::vector<double>;
// A noise prediction (epsilon) or an ODE velocity; same layout as StateVec.
using NoisePred = std::vector<double>;

inline void check_same_dim(std::span<const double> a, std::span<const double> b,
                           const char* what) {
  if (a.size() != b.size()) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + ": " +
                                           std::to_string(a.size()) + " vs " +
                                           std::to_string(b.size()));
  }
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// out = a * x + b * y, element-wise.
inline StateVec axpby(double a, std::span<const double> x, double b,
                      std::span<const double> y) {
  StateVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace skipdiff
