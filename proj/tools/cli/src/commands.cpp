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

#include "skipdiff/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "skipdiff/error.hpp"
#include "skipdiff/parallel.hpp"
#include "skipdiff/sequential.hpp"

namespace skipdiff::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Files are written next to their destination and renamed into place only
// once every output of the command has been produced.
class StagedOutputs {
 public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;
  ~StagedOutputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& [staged, final_path] : files_) fs::remove(staged, ec);
  }

  std::ofstream open(const std::string& path) {
    const std::string staged = path + ".partial";
    std::ofstream out(staged);
    if (!out) fail(ErrorCode::ConfigError, "cannot write '" + path + "'");
    files_.emplace_back(staged, path);
    return out;
  }

  void commit() {
    for (const auto& [staged, final_path] : files_) fs::rename(staged, final_path);
    committed_ = true;
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
  bool committed_ = false;
};

void close_checked(std::ofstream& out, const std::string& what) {
  out.close();
  if (!out) fail(ErrorCode::ConfigError, "failed writing " + what);
}

std::string dim_header(std::size_t dim) {
  std::string h;
  for (std::size_t j = 0; j < dim; ++j) h += ",dim" + std::to_string(j);
  return h;
}

// Sequential Euler has no evaluation hooks; report one round per step with
// the measured wall time spread evenly.
std::vector<RoundReport> euler_rounds(const Trajectory& traj) {
  std::vector<RoundReport> rounds;
  const double per = traj.eval_count ? traj.wall_ms / traj.eval_count : 0.0;
  for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
    rounds.push_back({traj.states[i].t, 1, per, {{0, 0.0, per}}});
  }
  return rounds;
}

ordered_json config_echo(const KeyValueConfig& kv) {
  ordered_json out = ordered_json::object();
  for (const auto& [key, value] : kv.values()) out[key] = value;
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int exit_code_for(const Error& error) noexcept {
  switch (error.code()) {
    case ErrorCode::ConfigError: return kExitConfigError;
    case ErrorCode::SuiteNotFound: return kExitSuiteNotFound;
    default: return kExitRuntimeError;
  }
}

NoiseSchedule make_schedule(const RunConfig& c) {
  try {
    if (c.schedule == ScheduleKind::Cosine) return build_cosine(c.steps, c.cosine_offset);
    if (c.beta_start) return build_linear_beta(c.steps, *c.beta_start, *c.beta_end);
    return default_schedule(c.steps);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, std::string("schedule: ") + e.what());
  }
}

SigmaGrid make_grid(const RunConfig& c) {
  try {
    return build_sigma_grid(c.steps, c.sigma_min, c.sigma_max, c.rho);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, std::string("sigma grid: ") + e.what());
  }
}

Denoiser make_denoiser(const RunConfig& c) {
  Denoiser d = c.denoiser == DenoiserChoice::Mixture ? Denoiser::analytic(c.mixture)
                                                     : Denoiser::state_independent(c.denoiser_seed);
  if (c.perturb_scale > 0) d = Denoiser::perturbed(std::move(d), c.perturb_scale);
  if (c.latency) d = Denoiser::with_latency(std::move(d), *c.latency);
  return d;
}

SampleRun run_single(const RunConfig& c, const NoiseSchedule& s, const Denoiser& d,
                     std::uint64_t seed, const std::shared_ptr<WorkerPool>& pool) {
  ParallelOptions options;
  options.workers = c.workers;
  options.recompute_anchor_eps = c.recompute_anchor_eps;
  options.pool = pool;
  const RngStream stream(seed);

  if (c.family == Family::Euler) {
    const SigmaGrid g = make_grid(c);
    const VelocityFn velocity = mixture_velocity(c.mixture);
    StateVec x = initial_state(stream, c.steps, c.dim);
    for (double& v : x) v *= c.sigma_max;
    switch (c.mode) {
      case Mode::Sequential: {
        SampleRun run{sample_euler(g, velocity, x), {}};
        run.rounds = euler_rounds(run.trajectory);
        return run;
      }
      case Mode::Aggressive: return run_aggressive_euler(g, velocity, x, c.devices, options);
      case Mode::Conservative: return run_conservative_euler(g, velocity, x, c.devices, options);
    }
  }

  const StateVec x_T = initial_state(stream, c.steps, c.dim);
  if (c.family == Family::Ddpm) {
    switch (c.mode) {
      case Mode::Sequential: {
        SampleRun run;
        run.trajectory = sample_ddpm(s, d, x_T, stream, &run.rounds);
        return run;
      }
      case Mode::Aggressive: return run_aggressive_ddpm(s, d, x_T, c.devices, stream, options);
      case Mode::Conservative:
        return run_conservative_ddpm(s, d, x_T, c.devices, stream, options);
    }
  }
  switch (c.mode) {
    case Mode::Sequential: {
      SampleRun run;
      run.trajectory = sample_ddim(s, d, x_T, c.rule, stream,
                                   strided_subsequence(c.steps, c.stride), &run.rounds);
      return run;
    }
    case Mode::Aggressive: return run_aggressive(s, d, x_T, c.devices, c.rule, stream, options);
    case Mode::Conservative:
      return run_conservative(s, d, x_T, c.devices, c.rule, stream, options);
  }
  fail(ErrorCode::ConfigError, "unsupported sampler");
}

ordered_json cmd_sample(const KeyValueConfig& kv) {
  const RunConfig c = RunConfig::from(kv);
  const NoiseSchedule s = make_schedule(c);
  const Denoiser d = make_denoiser(c);
  if (c.family == Family::Euler) make_grid(c);

  StagedOutputs staged;
  std::ofstream samples = staged.open(c.outputs.samples);
  std::ofstream rounds_csv = staged.open(c.outputs.rounds);
  std::ofstream report_file = staged.open(c.outputs.report);
  std::ofstream trajectory_csv;
  if (!c.outputs.trajectory.empty()) trajectory_csv = staged.open(c.outputs.trajectory);

  samples << "seed" << dim_header(c.dim) << "\n";
  rounds_csv << "round,anchor_t,parallel_evals,round_wall_ms\n";

  std::shared_ptr<WorkerPool> pool;
  if (c.mode != Mode::Sequential) {
    const std::size_t workers = c.workers > 0 ? c.workers : static_cast<std::size_t>(c.devices);
    pool = std::make_shared<WorkerPool>(capped_worker_count(workers));
  }

  ordered_json round_list = ordered_json::array();
  std::size_t total_evals = 0, round_index = 0;
  double total_wall = 0.0;
  for (std::size_t i = 0; i < c.samples; ++i) {
    const std::uint64_t seed = c.seed + i;
    const SampleRun run = run_single(c, s, d, seed, pool);
    samples << seed;
    for (double v : run.trajectory.final_state()) samples << "," << fmt(v);
    samples << "\n";
    if (i == 0 && trajectory_csv.is_open()) {
      trajectory_csv << "t" << dim_header(c.dim) << "\n";
      for (const auto& p : run.trajectory.states) {
        trajectory_csv << p.t;
        for (double v : p.x) trajectory_csv << "," << fmt(v);
        trajectory_csv << "\n";
      }
    }
    for (const auto& r : run.rounds) {
      rounds_csv << round_index << "," << r.anchor_t << "," << r.parallel_evals << ","
                 << fmt(r.round_wall_ms) << "\n";
      round_list.push_back({{"round", round_index},
                            {"sample", i},
                            {"anchor_t", r.anchor_t},
                            {"parallel_evals", r.parallel_evals},
                            {"round_wall_ms", r.round_wall_ms}});
      total_evals += r.parallel_evals;
      total_wall += r.round_wall_ms;
      ++round_index;
    }
  }

  ordered_json report;
  report["config"] = config_echo(kv);
  report["totals"] = {{"samples", c.samples},
                      {"evals", total_evals},
                      {"rounds", round_index},
                      {"wall_ms", total_wall}};
  ordered_json artifacts = {{"samples", c.outputs.samples}, {"rounds", c.outputs.rounds}};
  if (!c.outputs.trajectory.empty()) artifacts["trajectory"] = c.outputs.trajectory;
  report["artifacts"] = artifacts;
  report["rounds"] = std::move(round_list);
  report_file << report.dump(2) << "\n";

  close_checked(samples, c.outputs.samples);
  close_checked(rounds_csv, c.outputs.rounds);
  close_checked(report_file, c.outputs.report);
  if (trajectory_csv.is_open()) close_checked(trajectory_csv, c.outputs.trajectory);
  staged.commit();
  return report;
}

ordered_json cmd_bench(const KeyValueConfig& kv) {
  RunConfig c = RunConfig::from(kv);
  if (!c.latency || c.latency->eval_time_ms <= 0) {
    fail(ErrorCode::ConfigError, "bench needs latency.eval_ms > 0");
  }
  if (c.family == Family::Euler) fail(ErrorCode::ConfigError, "bench supports ddim and ddpm");
  const NoiseSchedule s = make_schedule(c);
  const Denoiser d = make_denoiser(c);

  const auto median_wall = [&](const RunConfig& rc) {
    std::shared_ptr<WorkerPool> pool;
    if (rc.mode != Mode::Sequential) {
      const std::size_t w = rc.workers > 0 ? rc.workers : static_cast<std::size_t>(rc.devices);
      pool = std::make_shared<WorkerPool>(capped_worker_count(w));
    }
    run_single(rc, s, d, rc.seed, pool);  // warm-up
    std::vector<double> walls;
    for (int r = 0; r < rc.bench.repeats; ++r) {
      walls.push_back(run_single(rc, s, d, rc.seed, pool).trajectory.wall_ms);
    }
    return median(walls);
  };

  StagedOutputs staged;
  std::ofstream csv = staged.open(c.outputs.bench);
  csv << "mode,devices,median_ms,speedup,theory_bound\n";

  RunConfig seq = c;
  seq.mode = Mode::Sequential;
  seq.stride = 1;
  const double base = median_wall(seq);
  ordered_json rows = ordered_json::array();
  const auto emit = [&](Mode mode, int devices, double med, double bound) {
    csv << to_string(mode) << "," << devices << "," << fmt(med) << "," << fmt(base / med) << ","
        << fmt(bound) << "\n";
    rows.push_back({{"mode", to_string(mode)},
                    {"devices", devices},
                    {"median_ms", med},
                    {"speedup", base / med},
                    {"theory_bound", bound}});
  };
  emit(Mode::Sequential, 1, base, base);
  for (Mode mode : c.bench.modes) {
    if (mode == Mode::Sequential) continue;
    for (int devices : c.bench.devices) {
      RunConfig rc = c;
      rc.mode = mode;
      rc.devices = devices;
      const double bound = mode == Mode::Aggressive ? base / devices : 2.0 * base / (devices + 1);
      emit(mode, devices, median_wall(rc), bound);
    }
  }
  close_checked(csv, c.outputs.bench);
  staged.commit();
  return rows;
}

SampleSet read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("seed", 0) != 0) {
    fail(ErrorCode::ParseError, path + ": missing 'seed,dim0,...' header");
  }
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (dim == 0) fail(ErrorCode::ParseError, path + ": header has no dimensions");
  SampleSet set;
  set.label = path;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<double> fields;
    try {
      fields = parse_doubles(line, path);
    } catch (const Error&) {
      fail(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (fields.size() != dim + 1) {
      fail(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": expected " +
                                      std::to_string(dim + 1) + " fields");
    }
    set.samples.emplace_back(fields.begin() + 1, fields.end());
  }
  if (set.samples.empty()) fail(ErrorCode::ParseError, path + ": no samples");
  return set;
}

ordered_json cmd_compare(const std::string& file_a, const std::string& file_b,
                         const CompareParams& params) {
  const SampleSet a = read_samples_csv(file_a);
  const SampleSet b = read_samples_csv(file_b);
  ordered_json out;
  out["sliced_w2"] = sliced_w2(a, b, params.projections, params.seed);
  out["mmd"] = a.size() >= 2 && b.size() >= 2 ? ordered_json(mmd_gaussian(a, b, params.bandwidth))
                                              : ordered_json(nullptr);
  out["n_a"] = a.size();
  out["n_b"] = b.size();
  out["params"] = {{"projections", params.projections},
                   {"bandwidth", params.bandwidth},
                   {"seed", params.seed}};
  return out;
}

void cmd_dump_schedule(const KeyValueConfig& kv, std::ostream& out) {
  const RunConfig c = RunConfig::from(kv);
  const NoiseSchedule s = make_schedule(c);
  out << "t,alpha_bar,beta\n";
  for (int t = 0; t <= s.steps(); ++t) {
    out << t << "," << fmt(s.alpha_at(t)) << "," << fmt(t == 0 ? 0.0 : s.beta_at(t)) << "\n";
  }
}

void cmd_probe(const KeyValueConfig& kv, std::ostream& out) {
  const RunConfig c = RunConfig::from(kv);
  const NoiseSchedule s = make_schedule(c);
  const Denoiser d = make_denoiser(c);
  const NoisePred eps = d.evaluate(s, c.probe_x, c.probe_t);
  for (std::size_t j = 0; j < eps.size(); ++j) out << (j ? "," : "") << fmt(eps[j]);
  out << "\n";
}

KeyValueConfig config_from_report(const std::string& report_path) {
  std::ifstream in(report_path);
  if (!in) fail(ErrorCode::ConfigError, "cannot read report '" + report_path + "'");
  nlohmann::json report;
  try {
    in >> report;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, report_path + ": " + e.what());
  }
  if (!report.contains("config") || !report["config"].is_object()) {
    fail(ErrorCode::ConfigError, report_path + ": no config echo");
  }
  KeyValueConfig kv;
  for (const auto& [key, value] : report["config"].items()) {
    if (!value.is_string()) fail(ErrorCode::ConfigError, "config echo '" + key + "' is not text");
    kv.set(key, value.get<std::string>());
  }
  return kv;
}

}  // namespace skipdiff::cli
