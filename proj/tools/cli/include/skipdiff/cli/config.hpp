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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/schedule.hpp"
#include "skipdiff/transitions.hpp"

namespace skipdiff::cli {

// Flat key = value configuration. Every accepted key has a default, so the
// full effective configuration can be echoed into reports and replayed.
//
//   # comment
//   steps = 48
//   mode = aggressive
//
// Unknown or repeated keys are a ConfigError.
class KeyValueConfig {
 public:
  KeyValueConfig();

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  // Applies "key=value". Unknown keys are rejected.
  void set(const std::string& key, const std::string& value);
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  static const std::vector<std::pair<std::string, std::string>>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

enum class Family { Ddim, Ddpm, Euler };
enum class Mode { Sequential, Aggressive, Conservative };
enum class DenoiserChoice { Mixture, StateIndependent };

struct OutputPaths {
  std::string samples;
  std::string report;
  std::string rounds;
  std::string trajectory;  // empty: not written
  std::string bench;
};

struct BenchSweep {
  std::vector<int> devices;
  std::vector<Mode> modes;
  int repeats = 5;
};

struct CompareParams {
  std::size_t projections = 64;
  double bandwidth = 1.0;
  std::uint64_t seed = 0;
};

// Typed, validated view of a KeyValueConfig.
struct RunConfig {
  ScheduleKind schedule = ScheduleKind::LinearBeta;
  int steps = 50;
  std::optional<double> beta_start;
  std::optional<double> beta_end;
  double cosine_offset = 0.008;

  Family family = Family::Ddim;
  Mode mode = Mode::Sequential;
  int devices = 1;
  VarianceRule rule;
  int stride = 1;
  bool recompute_anchor_eps = false;
  std::size_t workers = 0;

  std::uint64_t seed = 0;
  std::size_t samples = 1;

  DenoiserChoice denoiser = DenoiserChoice::Mixture;
  GaussianMixture mixture;
  std::size_t dim = 2;
  std::uint64_t denoiser_seed = 0;
  double perturb_scale = 0.0;
  std::optional<LatencyModel> latency;

  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;

  StateVec probe_x;
  int probe_t = 1;

  OutputPaths outputs;
  BenchSweep bench;
  CompareParams compare;

  static RunConfig from(const KeyValueConfig& kv);
};

std::string to_string(Family family);
std::string to_string(Mode mode);

// "a,b,c" with optional whitespace.
std::vector<double> parse_doubles(const std::string& text, const std::string& key);

}  // namespace skipdiff::cli
