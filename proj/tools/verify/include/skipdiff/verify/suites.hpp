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
#include <vector>

#include "json.hpp"

namespace skipdiff::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;
  double runtime_ms = 0.0;

  bool passed() const;
  std::size_t failures() const;
};

// equivalence, reductions, marginals, coefficients, speedup, quality, euler,
// accounting, invariance.
const std::vector<std::string>& suite_names();

// Throws SuiteNotFound for an unknown name.
SuiteResult run_suite(const std::string& name);

nlohmann::ordered_json to_json(const SuiteResult& result);

}  // namespace skipdiff::verify
