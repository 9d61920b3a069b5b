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

#include "skipdiff/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "skipdiff/error.hpp"

namespace skipdiff::cli {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  fail(ErrorCode::ConfigError, "'" + key + "' = '" + value + "': expected " + expected);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end || !std::isfinite(out)) {
    bad_value(key, value, "a finite number");
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int out = 0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

Mode parse_mode(const std::string& key, const std::string& value) {
  if (value == "sequential") return Mode::Sequential;
  if (value == "aggressive") return Mode::Aggressive;
  if (value == "conservative") return Mode::Conservative;
  bad_value(key, value, "sequential, aggressive or conservative");
}

VarianceRule parse_rule(const std::string& key, const std::string& value) {
  if (value == "deterministic") return VarianceRule::deterministic();
  if (value == "ddpm") return VarianceRule::ddpm_induced();
  if (value.rfind("eta:", 0) == 0) {
    const VarianceRule rule = VarianceRule::with_eta(parse_double(key, value.substr(4)));
    if (!(rule.eta >= 0.0 && rule.eta <= 1.0)) bad_value(key, value, "eta in [0, 1]");
    return rule;
  }
  bad_value(key, value, "deterministic, ddpm or eta:<value>");
}

}  // namespace

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_double(key, part));
  if (out.empty()) bad_value(key, text, "a comma-separated list of numbers");
  return out;
}

const std::vector<std::pair<std::string, std::string>>& KeyValueConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"schedule", "linear"},
      {"steps", "50"},
      {"beta_start", "auto"},
      {"beta_end", "auto"},
      {"cosine_offset", "0.008"},
      {"family", "ddim"},
      {"mode", "sequential"},
      {"devices", "1"},
      {"variance", "deterministic"},
      {"stride", "1"},
      {"recompute_anchor_eps", "false"},
      {"workers", "0"},
      {"seed", "0"},
      {"samples", "1"},
      {"denoiser", "mixture"},
      {"mixture.weights", "0.3,0.7"},
      {"mixture.means", "-1.5,0.5;1.0,-0.5"},
      {"mixture.variances", "0.3,0.5"},
      {"dim", "2"},
      {"denoiser_seed", "0"},
      {"perturb_scale", "0"},
      {"latency.eval_ms", "0"},
      {"latency.overhead_ms", "0"},
      {"latency.clock", "real"},
      {"sigma_min", "0.002"},
      {"sigma_max", "80"},
      {"rho", "7"},
      {"probe.x", "0.3,0.1"},
      {"probe.t", "1"},
      {"output.samples", "samples.csv"},
      {"output.report", "report.json"},
      {"output.rounds", "rounds.csv"},
      {"output.trajectory", ""},
      {"output.bench", "bench.csv"},
      {"bench.devices", "1,2,3,4"},
      {"bench.modes", "aggressive,conservative"},
      {"bench.repeats", "5"},
      {"compare.projections", "64"},
      {"compare.bandwidth", "1"},
      {"compare.seed", "0"},
  };
  return table;
}

KeyValueConfig::KeyValueConfig() {
  for (const auto& [key, value] : defaults()) values_[key] = value;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  it->second = value;
}

void KeyValueConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    fail(ErrorCode::ConfigError, "expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  return it->second;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> seen;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      fail(ErrorCode::ConfigError,
           "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    seen.push_back(key);
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string to_string(Family family) {
  switch (family) {
    case Family::Ddim: return "ddim";
    case Family::Ddpm: return "ddpm";
    case Family::Euler: return "euler";
  }
  return "unknown";
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Sequential: return "sequential";
    case Mode::Aggressive: return "aggressive";
    case Mode::Conservative: return "conservative";
  }
  return "unknown";
}

RunConfig RunConfig::from(const KeyValueConfig& kv) {
  RunConfig c;
  const auto get = [&kv](const char* key) -> const std::string& { return kv.get(key); };

  const std::string& schedule = get("schedule");
  if (schedule == "linear") {
    c.schedule = ScheduleKind::LinearBeta;
  } else if (schedule == "cosine") {
    c.schedule = ScheduleKind::Cosine;
  } else {
    bad_value("schedule", schedule, "linear or cosine");
  }
  c.steps = parse_int<int>("steps", get("steps"));
  if (c.steps < 1) bad_value("steps", get("steps"), "a positive integer");
  if (get("beta_start") != "auto") c.beta_start = parse_double("beta_start", get("beta_start"));
  if (get("beta_end") != "auto") c.beta_end = parse_double("beta_end", get("beta_end"));
  if (c.beta_start.has_value() != c.beta_end.has_value()) {
    fail(ErrorCode::ConfigError, "beta_start and beta_end must be set together");
  }
  c.cosine_offset = parse_double("cosine_offset", get("cosine_offset"));

  const std::string& family = get("family");
  if (family == "ddim") {
    c.family = Family::Ddim;
  } else if (family == "ddpm") {
    c.family = Family::Ddpm;
  } else if (family == "euler") {
    c.family = Family::Euler;
  } else {
    bad_value("family", family, "ddim, ddpm or euler");
  }
  c.mode = parse_mode("mode", get("mode"));
  c.devices = parse_int<int>("devices", get("devices"));
  if (c.devices < 1) bad_value("devices", get("devices"), "a positive integer");
  c.rule = parse_rule("variance", get("variance"));
  c.stride = parse_int<int>("stride", get("stride"));
  if (c.stride < 1) bad_value("stride", get("stride"), "a positive integer");
  if (c.stride != 1 && (c.family != Family::Ddim || c.mode != Mode::Sequential)) {
    fail(ErrorCode::ConfigError, "stride applies to sequential ddim only");
  }
  c.recompute_anchor_eps = parse_bool("recompute_anchor_eps", get("recompute_anchor_eps"));
  c.workers = parse_int<std::size_t>("workers", get("workers"));
  c.seed = parse_int<std::uint64_t>("seed", get("seed"));
  c.samples = parse_int<std::size_t>("samples", get("samples"));
  if (c.samples < 1) bad_value("samples", get("samples"), "a positive integer");

  const std::string& denoiser = get("denoiser");
  if (denoiser == "mixture") {
    c.denoiser = DenoiserChoice::Mixture;
    c.mixture.weights = parse_doubles(get("mixture.weights"), "mixture.weights");
    c.mixture.variances = parse_doubles(get("mixture.variances"), "mixture.variances");
    for (const auto& mean : split(get("mixture.means"), ';')) {
      c.mixture.means.push_back(parse_doubles(mean, "mixture.means"));
    }
    try {
      c.mixture.validate();
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, std::string("mixture: ") + e.what());
    }
    c.dim = c.mixture.dim();
  } else if (denoiser == "state_independent") {
    c.denoiser = DenoiserChoice::StateIndependent;
    c.dim = parse_int<std::size_t>("dim", get("dim"));
    if (c.dim < 1) bad_value("dim", get("dim"), "a positive integer");
  } else {
    bad_value("denoiser", denoiser, "mixture or state_independent");
  }
  c.denoiser_seed = parse_int<std::uint64_t>("denoiser_seed", get("denoiser_seed"));
  c.perturb_scale = parse_double("perturb_scale", get("perturb_scale"));
  if (c.perturb_scale < 0) bad_value("perturb_scale", get("perturb_scale"), "a value >= 0");

  LatencyModel latency;
  latency.eval_time_ms = parse_double("latency.eval_ms", get("latency.eval_ms"));
  latency.dispatch_overhead_ms = parse_double("latency.overhead_ms", get("latency.overhead_ms"));
  const std::string& clock = get("latency.clock");
  if (clock == "real") {
    latency.clock = ClockMode::Real;
  } else if (clock == "virtual") {
    latency.clock = ClockMode::Virtual;
  } else {
    bad_value("latency.clock", clock, "real or virtual");
  }
  if (latency.eval_time_ms < 0 || latency.dispatch_overhead_ms < 0) {
    fail(ErrorCode::ConfigError, "latency times must be nonnegative");
  }
  if (latency.eval_time_ms > 0 || latency.dispatch_overhead_ms > 0) c.latency = latency;

  c.sigma_min = parse_double("sigma_min", get("sigma_min"));
  c.sigma_max = parse_double("sigma_max", get("sigma_max"));
  c.rho = parse_double("rho", get("rho"));
  if (c.family == Family::Euler) {
    if (c.denoiser != DenoiserChoice::Mixture) {
      fail(ErrorCode::ConfigError, "euler sampling needs denoiser = mixture");
    }
    if (c.latency || c.perturb_scale > 0) {
      fail(ErrorCode::ConfigError, "euler sampling uses the exact velocity; no wrappers");
    }
  }

  c.probe_x = parse_doubles(get("probe.x"), "probe.x");
  c.probe_t = parse_int<int>("probe.t", get("probe.t"));

  c.outputs = {get("output.samples"), get("output.report"), get("output.rounds"),
               get("output.trajectory"), get("output.bench")};

  for (double d : parse_doubles(get("bench.devices"), "bench.devices")) {
    if (d < 1 || d != static_cast<int>(d)) {
      bad_value("bench.devices", get("bench.devices"), "positive integers");
    }
    c.bench.devices.push_back(static_cast<int>(d));
  }
  for (const auto& mode : split(get("bench.modes"), ',')) {
    c.bench.modes.push_back(parse_mode("bench.modes", mode));
  }
  c.bench.repeats = parse_int<int>("bench.repeats", get("bench.repeats"));
  if (c.bench.repeats < 5) bad_value("bench.repeats", get("bench.repeats"), "at least 5");

  c.compare.projections = parse_int<std::size_t>("compare.projections", get("compare.projections"));
  if (c.compare.projections < 1) {
    bad_value("compare.projections", get("compare.projections"), "a positive integer");
  }
  c.compare.bandwidth = parse_double("compare.bandwidth", get("compare.bandwidth"));
  if (c.compare.bandwidth <= 0) bad_value("compare.bandwidth", get("compare.bandwidth"), "> 0");
  c.compare.seed = parse_int<std::uint64_t>("compare.seed", get("compare.seed"));
  return c;
}

}  // namespace skipdiff::cli
