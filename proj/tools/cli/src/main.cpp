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

// skipdiff command-line harness.
//
//   skipdiff sample  [--config FILE | --from-report REPORT] [--set key=value]...
//   skipdiff bench   [--config FILE] [--set key=value]...
//   skipdiff verify  SUITE|all [--out FILE]
//   skipdiff compare A.csv B.csv [--config FILE] [--set key=value]...
//   skipdiff dump-schedule [--config FILE] [--set key=value]...
//   skipdiff probe   [--config FILE] [--set key=value]...
//
// Exit codes: 0 ok, 1 verification failed, 2 configuration error,
// 3 unknown suite, 4 runtime error.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "skipdiff/cli/commands.hpp"
#include "skipdiff/error.hpp"
#include "skipdiff/verify/suites.hpp"

namespace {

using namespace skipdiff;
using namespace skipdiff::cli;

struct ConfigArgs {
  std::string file;
  std::string from_report;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd, bool allow_report = false) {
    cmd->add_option("--config,-c", file, "key = value config file")->check(CLI::ExistingFile);
    if (allow_report) {
      cmd->add_option("--from-report", from_report, "replay the config echoed in a report")
          ->check(CLI::ExistingFile);
    }
    cmd->add_option("--set,-s", overrides, "override one key (key=value)");
  }

  KeyValueConfig build() const {
    if (!file.empty() && !from_report.empty()) {
      fail(ErrorCode::ConfigError, "--config and --from-report are exclusive");
    }
    KeyValueConfig kv = !from_report.empty() ? config_from_report(from_report)
                        : !file.empty()      ? KeyValueConfig::load(file)
                                             : KeyValueConfig();
    for (const auto& assignment : overrides) kv.set_assignment(assignment);
    return kv;
  }
};

int run_verify(const std::string& selector, const std::string& out_path) {
  std::vector<std::string> names;
  if (selector == "all") {
    names = verify::suite_names();
  } else {
    names.push_back(selector);
  }
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  bool all_passed = true;
  for (const auto& name : names) {
    const auto result = verify::run_suite(name);
    all_passed = all_passed && result.passed();
    summary.push_back(verify::to_json(result));
    std::cerr << (result.passed() ? "PASS " : "FAIL ") << name << " ("
              << result.checks.size() - result.failures() << "/" << result.checks.size()
              << " checks)\n";
  }
  if (out_path.empty()) {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) fail(ErrorCode::ConfigError, "cannot write '" + out_path + "'");
    out << summary.dump(2) << "\n";
  }
  return all_passed ? kExitOk : kExitVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skipdiff: skip-transition diffusion samplers and parallel draft-and-refine"};
  app.require_subcommand(1);

  ConfigArgs sample_args, bench_args, compare_args, dump_args, probe_args;
  auto* sample = app.add_subcommand("sample", "run a sampler and write samples, rounds and report");
  sample_args.attach(sample, true);

  auto* bench = app.add_subcommand("bench", "latency sweep over devices and modes");
  bench_args.attach(bench);

  std::string suite, verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "run a verification suite (or 'all')");
  verify_cmd->add_option("suite", suite, "suite name")->required();
  verify_cmd->add_option("--out,-o", verify_out, "write the JSON summary here");

  std::string file_a, file_b, compare_out;
  auto* compare = app.add_subcommand("compare", "distribution distances between two sample CSVs");
  compare->add_option("a", file_a, "first samples CSV")->required();
  compare->add_option("b", file_b, "second samples CSV")->required();
  compare->add_option("--out,-o", compare_out, "write the JSON here");
  compare_args.attach(compare);

  auto* dump = app.add_subcommand("dump-schedule", "print t,alpha_bar,beta");
  dump_args.attach(dump);

  auto* probe = app.add_subcommand("probe", "evaluate the denoiser at probe.x, probe.t");
  probe_args.attach(probe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (sample->parsed()) {
      const auto report = cmd_sample(sample_args.build());
      std::cout << report["totals"].dump() << "\n";
    } else if (bench->parsed()) {
      const auto kv = bench_args.build();
      cmd_bench(kv);
      std::cout << "wrote " << kv.get("output.bench") << "\n";
    } else if (verify_cmd->parsed()) {
      return run_verify(suite, verify_out);
    } else if (compare->parsed()) {
      const RunConfig c = RunConfig::from(compare_args.build());
      const auto result = cmd_compare(file_a, file_b, c.compare);
      if (compare_out.empty()) {
        std::cout << result.dump(2) << "\n";
      } else {
        std::ofstream out(compare_out);
        out << result.dump(2) << "\n";
      }
    } else if (dump->parsed()) {
      cmd_dump_schedule(dump_args.build(), std::cout);
    } else if (probe->parsed()) {
      cmd_probe(probe_args.build(), std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}
