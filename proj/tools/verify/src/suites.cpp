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

#include "skipdiff/verify/suites.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "skipdiff/denoiser.hpp"
#include "skipdiff/error.hpp"
#include "skipdiff/metrics.hpp"
#include "skipdiff/parallel.hpp"
#include "skipdiff/sequential.hpp"

namespace skipdiff::verify {

namespace {

class Recorder {
 public:
  explicit Recorder(SuiteResult& out) : out_(out) {}

  void expect(bool ok, std::string name, std::string detail = {}) {
    out_.checks.push_back({std::move(name), ok, std::move(detail)});
  }

 private:
  SuiteResult& out_;
};

template <typename... Parts>
std::string cat(const Parts&... parts) {
  std::ostringstream out;
  out.precision(6);
  (out << ... << parts);
  return out.str();
}

bool same_states(const Trajectory& a, const Trajectory& b) {
  if (a.states.size() != b.states.size()) return false;
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    if (a.states[i].t != b.states[i].t || a.states[i].x != b.states[i].x) return false;
  }
  return true;
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

const char* rule_name(const VarianceRule& rule) {
  return rule.kind == VarianceRule::Kind::Deterministic ? "deterministic" : "ddpm";
}

GaussianMixture quality_mixture() {
  return {{0.3, 0.7}, {{-1.5, 0.5}, {1.0, -0.5}}, {0.3, 0.5}};
}

// ---------------------------------------------------------------------------

void equivalence(Recorder& r) {
  const auto d = Denoiser::state_independent(77);
  for (int steps : {8, 20, 50}) {
    const auto s = default_schedule(steps);
    for (int devices : {1, 2, 3, 4}) {
      ParallelOptions options;
      options.pool = std::make_shared<WorkerPool>(capped_worker_count(devices));
      for (const auto& rule : {VarianceRule::deterministic(), VarianceRule::ddpm_induced()}) {
        const RngStream stream(100 * steps + devices);
        const auto x_T = initial_state(stream, steps, 3);
        const auto seq = sample_ddim(s, d, x_T, rule, stream);
        const auto agg = run_aggressive(s, d, x_T, devices, rule, stream, options);
        const auto con = run_conservative(s, d, x_T, devices, rule, stream, options);
        const std::string key = cat("T=", steps, " devices=", devices, " ", rule_name(rule));
        r.expect(same_states(agg.trajectory, seq), "aggressive " + key);
        r.expect(same_states(con.trajectory, seq), "conservative " + key);
      }
    }
  }
}

void reductions(Recorder& r) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> pick_steps(1, 200);
  int ddpm_ok = 0, ddim_ok = 0, ddim_noisy_ok = 0, euler_ok = 0;
  constexpr int kTrials = 1000;
  for (int trial = 0; trial < kTrials; ++trial) {
    const int steps = pick_steps(rng);
    const auto s = trial % 2 ? build_cosine(steps, 0.008) : default_schedule(steps);
    const int t = std::uniform_int_distribution<int>(1, steps)(rng);
    StateVec x(3), x0(3), eps(3), z(3), v(3);
    for (int j = 0; j < 3; ++j) {
      x[j] = normal(rng);
      x0[j] = normal(rng);
      eps[j] = normal(rng);
      z[j] = normal(rng);
      v[j] = normal(rng);
    }
    const double ab = s.alpha_at(t), prev = s.alpha_at(t - 1);
    const double alpha = ab / prev;  // per-step retention
    const double beta = 1.0 - alpha;

    // Textbook one-step posterior q(x_{t-1} | x_t, x_0).
    const double post_var = beta * (1.0 - prev) / (1.0 - ab);
    StateVec post_mean(3);
    for (int j = 0; j < 3; ++j) {
      post_mean[j] = std::sqrt(prev) * beta / (1.0 - ab) * x0[j] +
                     std::sqrt(alpha) * (1.0 - prev) / (1.0 - ab) * x[j];
    }
    const auto post = ddpm_skip_posterior(s, t, 1, x, x0);
    ddpm_ok += post.mean == post_mean && post.variance == post_var;

    // Standard DDIM update, deterministic and with the DDPM variance.
    StateVec det(3), noisy(3);
    const double sigma = std::sqrt(post_var);
    for (int j = 0; j < 3; ++j) {
      const double x0_hat = (x[j] - std::sqrt(1.0 - ab) * eps[j]) / std::sqrt(ab);
      det[j] = std::sqrt(prev) * x0_hat + std::sqrt(1.0 - prev) * eps[j];
      noisy[j] = std::sqrt(prev) * x0_hat + std::sqrt(std::max(0.0, 1.0 - prev - sigma * sigma)) * eps[j] +
                 sigma * z[j];
    }
    ddim_ok += ddim_skip(s, t, 1, x, eps, VarianceRule::deterministic(), {}) == det;
    ddim_noisy_ok += ddim_skip(s, t, 1, x, eps, VarianceRule::ddpm_induced(), z) == noisy;

    // Plain Euler step on a sigma grid.
    const auto g = build_sigma_grid(steps, 0.002, 80.0, 7.0);
    const int i = t - 1;
    StateVec step(3);
    for (int j = 0; j < 3; ++j) step[j] = x[j] + (g.sigma_at(i + 1) - g.sigma_at(i)) * v[j];
    euler_ok += euler_skip(g, i, 1, x, v) == step;
  }
  r.expect(ddpm_ok == kTrials, "ddpm posterior k=1 equals one-step posterior",
           cat(ddpm_ok, "/", kTrials, " exact"));
  r.expect(ddim_ok == kTrials, "ddim deterministic k=1 equals unit update",
           cat(ddim_ok, "/", kTrials, " exact"));
  r.expect(ddim_noisy_ok == kTrials, "ddim ddpm-variance k=1 equals unit update",
           cat(ddim_noisy_ok, "/", kTrials, " exact"));
  r.expect(euler_ok == kTrials, "euler k=1 equals plain Euler step",
           cat(euler_ok, "/", kTrials, " exact"));
}

void marginals(Recorder& r) {
  constexpr int kDraws = 100000;
  const auto s = default_schedule(50);
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> normal;
  const double x0 = 1.5;
  for (int c = 0; c < 20; ++c) {
    const int t = std::uniform_int_distribution<int>(1, 50)(rng);
    const int k = std::uniform_int_distribution<int>(1, t)(rng);
    const double from = s.alpha_at(t), to = s.alpha_at(t - k);
    const double target_mean = std::sqrt(to) * x0;
    const double target_var = 1.0 - to;
    for (bool ddim : {false, true}) {
      double sum = 0.0, sum2 = 0.0;
      for (int n = 0; n < kDraws; ++n) {
        const double noise = normal(rng);
        const StateVec x_t{std::sqrt(from) * x0 + std::sqrt(1.0 - from) * noise};
        const StateVec z{normal(rng)};
        const double y =
            ddim ? ddim_skip(s, t, k, x_t, {noise}, VarianceRule::ddpm_induced(), z)[0]
                 : ddpm_skip_sample(s, t, k, x_t, {x0}, z)[0];
        sum += y;
        sum2 += y * y;
      }
      const double mean = sum / kDraws;
      const double var = std::max(0.0, (sum2 - kDraws * mean * mean) / (kDraws - 1));
      const double mean_se = std::sqrt(target_var / kDraws);
      const double var_se = target_var * std::sqrt(2.0 / (kDraws - 1));
      const double mean_z = std::abs(mean - target_mean) / std::max(mean_se, 1e-300);
      const double var_z = std::abs(var - target_var) / std::max(var_se, 1e-300);
      const bool ok = std::abs(mean - target_mean) <= 4 * mean_se + 1e-12 &&
                      std::abs(var - target_var) <= 4 * var_se + 1e-12;
      r.expect(ok, cat(ddim ? "ddim-ddpm" : "ddpm", " t=", t, " k=", k),
               cat("mean ", mean_z, " SE, var ", var_z, " SE"));
    }
  }
}

void coefficients(Recorder& r) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> pick_steps(1, 200);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_noise = 0.0, worst_signal = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int steps = pick_steps(rng);
    const auto s = trial % 2 ? build_cosine(steps, 0.008) : default_schedule(steps);
    const int t = std::uniform_int_distribution<int>(1, steps)(rng);
    const int k = std::uniform_int_distribution<int>(1, t)(rng);
    VarianceRule rule = VarianceRule::deterministic();
    if (trial % 3 == 1) rule = VarianceRule::ddpm_induced();
    if (trial % 3 == 2) rule = VarianceRule::with_eta(unit(rng));
    const auto c = ddim_skip_coeffs(s, t, k, rule);
    const double from = s.alpha_at(t), to = s.alpha_at(t - k);
    worst_noise = std::max(
        worst_noise, std::abs(c.kappa * c.kappa * (1 - from) + c.sigma * c.sigma - (1 - to)));
    worst_signal =
        std::max(worst_signal, std::abs(c.lambda + c.kappa * std::sqrt(from) - std::sqrt(to)));
  }
  r.expect(worst_noise <= 1e-10, "kappa^2 (1 - abar_t) + sigma^2 = 1 - abar_{t-k}",
           cat("max residual ", worst_noise));
  r.expect(worst_signal <= 1e-10, "lambda + kappa sqrt(abar_t) = sqrt(abar_{t-k})",
           cat("max residual ", worst_signal));
}

void speedup(Recorder& r) {
  constexpr int kSteps = 48;
  constexpr int kRepeats = 5;
  const auto s = default_schedule(kSteps);
  const auto d = Denoiser::with_latency(Denoiser::state_independent(5),
                                        {50.0, 1.0, ClockMode::Real});
  const RngStream stream(1);
  const StateVec x_T = initial_state(stream, kSteps, 2);
  const auto rule = VarianceRule::deterministic();

  const auto median_of = [](const std::function<double()>& run) {
    run();  // warm-up
    std::vector<double> walls;
    for (int i = 0; i < kRepeats; ++i) walls.push_back(run());
    std::sort(walls.begin(), walls.end());
    return walls[walls.size() / 2];
  };
  const double base =
      median_of([&] { return sample_ddim(s, d, x_T, rule, stream).wall_ms; });
  for (ParallelMode mode : {ParallelMode::Aggressive, ParallelMode::Conservative}) {
    for (int devices : {2, 3, 4}) {
      ParallelOptions options;
      options.pool = std::make_shared<WorkerPool>(capped_worker_count(devices));
      const double wall = median_of([&] {
        return (mode == ParallelMode::Aggressive
                    ? run_aggressive(s, d, x_T, devices, rule, stream, options)
                    : run_conservative(s, d, x_T, devices, rule, stream, options))
            .trajectory.wall_ms;
      });
      const double measured = base / wall;
      // Ideal: sequential evaluations over synchronous rounds of the plan.
      const double theory = double(kSteps) / plan_blocks(kSteps, devices, mode).total_rounds;
      const std::string detail =
          cat("sequential ", base, " ms, parallel ", wall, " ms, speedup ", measured,
              "x, theory ", theory, "x");
      r.expect(measured >= 0.9 * theory,
               cat(to_string(mode), " devices=", devices, " >= 0.9 x theory"), detail);
      if (mode == ParallelMode::Aggressive && devices == 3) {
        r.expect(measured >= 2.5, "aggressive devices=3 >= 2.5x", detail);
      }
    }
  }
}

void quality(Recorder& r) {
  constexpr int kCount = 10000;
  constexpr int kSteps = 50;
  constexpr int kDevices = 4;
  constexpr std::size_t kProjections = 64;
  constexpr std::uint64_t kProjectionSeed = 17;
  const auto gm = quality_mixture();
  const auto s = default_schedule(kSteps);
  const auto d = Denoiser::analytic(gm);
  const auto rule = VarianceRule::deterministic();
  ParallelOptions options;
  options.pool = std::make_shared<WorkerPool>(capped_worker_count(kDevices));

  SampleSet seq_a{{}, "sequential A"}, seq_b{{}, "sequential B"}, agg{{}, "aggressive"},
      con{{}, "conservative"};
  for (int i = 0; i < kCount; ++i) {
    const RngStream a(i);
    seq_a.samples.push_back(
        sample_ddim(s, d, initial_state(a, kSteps, 2), rule, a).final_state());
    const RngStream b(kCount + i);
    const auto x_T = initial_state(b, kSteps, 2);
    seq_b.samples.push_back(sample_ddim(s, d, x_T, rule, b).final_state());
    agg.samples.push_back(
        run_aggressive(s, d, x_T, kDevices, rule, b, options).trajectory.final_state());
    con.samples.push_back(
        run_conservative(s, d, x_T, kDevices, rule, b, options).trajectory.final_state());
  }
  const double null = sliced_w2(seq_a, seq_b, kProjections, kProjectionSeed);
  for (const SampleSet* set : {&agg, &con}) {
    const double value = sliced_w2(*set, seq_a, kProjections, kProjectionSeed);
    r.expect(value <= 2 * null, set->label + " vs sequential <= 2 x null",
             cat("sliced-W2 ", value, ", null ", null, ", ratio ", value / null));
  }
}

void euler(Recorder& r) {
  constexpr double kSigmaMax = 80.0;
  const auto gm = GaussianMixture::standard_normal(1);
  const auto error_at = [&](int n) {
    const auto g = build_sigma_grid(n, 0.002, kSigmaMax, 7.0);
    const double x_init = kSigmaMax;
    const double exact = x_init / std::sqrt(1.0 + kSigmaMax * kSigmaMax);
    return std::abs(sample_euler(g, gm, {x_init}).final_state()[0] - exact);
  };
  const double e16 = error_at(16), e32 = error_at(32), e64 = error_at(64);
  for (auto [label, ratio] : {std::pair{"N=16 -> 32", e16 / e32}, std::pair{"N=32 -> 64", e32 / e64}}) {
    r.expect(ratio >= 1.7 && ratio <= 2.3, cat("error ratio ", label, " in [1.7, 2.3]"),
             cat("ratio ", ratio));
  }
}

void accounting(Recorder& r) {
  const auto d = Denoiser::state_independent(3);
  for (int steps : {8, 20, 50}) {
    const auto s = default_schedule(steps);
    const auto g = build_sigma_grid(steps, 0.002, 80.0, 7.0);
    for (int devices : {1, 2, 3, 4}) {
      for (ParallelMode mode : {ParallelMode::Aggressive, ParallelMode::Conservative}) {
        const bool agg = mode == ParallelMode::Aggressive;
        const int law_evals = agg ? steps + 1 : steps;
        const int law_rounds = agg ? 1 + ceil_div(steps, devices) : 2 * ceil_div(steps, devices + 1);
        const BlockPlan plan = plan_blocks(steps, devices, mode);

        const RngStream stream(steps);
        const auto x_T = initial_state(stream, steps, 2);
        const auto ddim = agg ? run_aggressive(s, d, x_T, devices, VarianceRule::ddpm_induced(), stream)
                              : run_conservative(s, d, x_T, devices, VarianceRule::ddpm_induced(), stream);
        std::atomic<int> calls{0};
        const VelocityFn field = [&calls](const StateVec& x, double sigma) {
          calls.fetch_add(1, std::memory_order_relaxed);
          return StateVec(x.size(), sigma);
        };
        const auto ode = agg ? run_aggressive_euler(g, field, {0.0}, devices)
                             : run_conservative_euler(g, field, {0.0}, devices);
        std::size_t summed = 0;
        for (const auto& round : ddim.rounds) summed += round.parallel_evals;

        const bool ok = plan.total_evals == law_evals && plan.total_rounds == law_rounds &&
                        ddim.trajectory.eval_count == static_cast<std::size_t>(law_evals) &&
                        summed == static_cast<std::size_t>(law_evals) &&
                        ddim.rounds.size() == static_cast<std::size_t>(law_rounds) &&
                        calls.load() == law_evals &&
                        ode.rounds.size() == static_cast<std::size_t>(law_rounds);
        r.expect(ok, cat(to_string(mode), " T=", steps, " devices=", devices),
                 cat("law ", law_evals, " evals / ", law_rounds, " rounds; ddim ",
                     ddim.trajectory.eval_count, " / ", ddim.rounds.size(), "; instrumented ",
                     calls.load(), " / ", ode.rounds.size()));
      }
    }
  }
}

void invariance(Recorder& r) {
  constexpr int kDevices = 4;
  constexpr int kSteps = 20;
  const GaussianMixture gm{{0.5, 0.5}, {{-1.0, 1.0}, {1.0, -1.0}}, {0.3, 0.3}};
  const auto s = default_schedule(kSteps);
  const auto d = Denoiser::analytic(gm);
  const RngStream stream(99);
  const auto x_T = initial_state(stream, kSteps, 2);
  const auto rule = VarianceRule::ddpm_induced();
  for (ParallelMode mode : {ParallelMode::Aggressive, ParallelMode::Conservative}) {
    const auto run = [&](const ParallelOptions& o) {
      return mode == ParallelMode::Aggressive
                 ? run_aggressive(s, d, x_T, kDevices, rule, stream, o)
                 : run_conservative(s, d, x_T, kDevices, rule, stream, o);
    };
    const auto reference = run({});
    int identical = 0;
    constexpr int kTrials = 20;
    for (int trial = 0; trial < kTrials; ++trial) {
      ParallelOptions options;
      options.workers = 1 + trial % kDevices;
      options.jitter_seed = 5000 + trial;
      options.max_jitter_ms = 0.3;
      identical += same_states(run(options).trajectory, reference.trajectory);
    }
    r.expect(identical == kTrials,
             cat(to_string(mode), " bit-identical across shuffled completion and 1..", kDevices,
                 " workers"),
             cat(identical, "/", kTrials, " trials identical"));
  }
}

using SuiteFn = void (*)(Recorder&);

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> suites = {
      {"equivalence", equivalence}, {"reductions", reductions}, {"marginals", marginals},
      {"coefficients", coefficients}, {"speedup", speedup},     {"quality", quality},
      {"euler", euler},             {"accounting", accounting}, {"invariance", invariance},
  };
  return suites;
}

}  // namespace

bool SuiteResult::passed() const { return !checks.empty() && failures() == 0; }

std::size_t SuiteResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

SuiteResult run_suite(const std::string& name) {
  const auto& suites = registry();
  const auto it = std::find_if(suites.begin(), suites.end(),
                               [&](const auto& entry) { return entry.first == name; });
  if (it == suites.end()) fail(ErrorCode::SuiteNotFound, "no verification suite '" + name + "'");
  SuiteResult result;
  result.suite = name;
  Recorder recorder(result);
  const auto start = std::chrono::steady_clock::now();
  it->second(recorder);
  result.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

nlohmann::ordered_json to_json(const SuiteResult& result) {
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return {{"suite", result.suite},
          {"passed", result.passed()},
          {"failures", result.failures()},
          {"runtime_ms", result.runtime_ms},
          {"checks", std::move(checks)}};
}

}  // namespace skipdiff::verify
