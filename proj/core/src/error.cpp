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

#include "skipdiff/error.hpp"

namespace skipdiff {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidScheduleParams: return "InvalidScheduleParams";
    case ErrorCode::TimestepOutOfRange: return "TimestepOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::InvalidMixture: return "InvalidMixture";
    case ErrorCode::InvalidLatencyModel: return "InvalidLatencyModel";
    case ErrorCode::InvalidSkip: return "InvalidSkip";
    case ErrorCode::InvalidVarianceRule: return "InvalidVarianceRule";
    case ErrorCode::VarianceTooLarge: return "VarianceTooLarge";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidSubsequence: return "InvalidSubsequence";
    case ErrorCode::InvalidPlanParams: return "InvalidPlanParams";
    case ErrorCode::PlanMismatch: return "PlanMismatch";
    case ErrorCode::WorkerFailure: return "WorkerFailure";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::TimestepMismatch: return "TimestepMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SuiteNotFound: return "SuiteNotFound";
  }
  return "Unknown";
}

}  // namespace skipdiff
