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
#include <iosfwd>
#include <memory>
#include <string>

#include "json.hpp"
#include "skipdiff/cli/config.hpp"
#include "skipdiff/metrics.hpp"
#include "skipdiff/report.hpp"
#include "skipdiff/worker_pool.hpp"

namespace skipdiff::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitVerificationFailed = 1,
  kExitConfigError = 2,
  kExitSuiteNotFound = 3,
  kExitRuntimeError = 4,
};

int exit_code_for(const Error& error) noexcept;

NoiseSchedule make_schedule(const RunConfig& c);
SigmaGrid make_grid(const RunConfig& c);
Denoiser make_denoiser(const RunConfig& c);

// One sample path from seed `seed` with the configured family and mode.
// `pool` may be null.
SampleRun run_single(const RunConfig& c, const NoiseSchedule& s, const Denoiser& d,
                     std::uint64_t seed, const std::shared_ptr<WorkerPool>& pool);

// Runs `samples` seeds and writes the configured outputs. Nothing is left on
// disk if any step fails. Returns the JSON report that was written.
nlohmann::ordered_json cmd_sample(const KeyValueConfig& kv);

// Latency sweep; writes the bench CSV and returns its rows.
nlohmann::ordered_json cmd_bench(const KeyValueConfig& kv);

nlohmann::ordered_json cmd_compare(const std::string& file_a, const std::string& file_b,
                                   const CompareParams& params);

void cmd_dump_schedule(const KeyValueConfig& kv, std::ostream& out);
void cmd_probe(const KeyValueConfig& kv, std::ostream& out);

// Rebuilds the configuration echoed under "config" in a sample report.
KeyValueConfig config_from_report(const std::string& report_path);

// Samples CSV: header "seed,dim0,...", one row per sample.
SampleSet read_samples_csv(const std::string& path);

}  // namespace skipdiff::cli
