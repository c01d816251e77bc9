// Copyright 2026 The softjoint Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment runner. Usage:
//   softjoint_cli <scenario> --config <path> [--out <dir>] [--seed <n>]
// Exit codes: 0 success, 1 invalid configuration or input, 2 runtime failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "softjoint/errors.h"
#include "softjoint/experiments.h"

namespace {

constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int Run(softjoint::Scenario scenario, const Options& options) {
  softjoint::ExperimentConfig config;
  try {
    config = softjoint::LoadConfig(options.config, scenario);
    if (options.seed) config.seed = *options.seed;
    if (!options.out.empty()) config.out_dir = options.out;
    if (config.out_dir.empty()) {
      throw softjoint::ConfigError("no output directory (--out or [experiment] out)");
    }
    config.Validate();
  } catch (const softjoint::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidationError;
  }

  try {
    const softjoint::ResultBundle bundle = softjoint::RunScenario(config);
    softjoint::WriteBundle(bundle, config.out_dir);
    int passed = 0, total = 0;
    for (const auto& c : bundle.summary["checks"]) {
      ++total;
      passed += c["pass"].get<bool>() ? 1 : 0;
    }
    std::cout << softjoint::ScenarioName(scenario) << ": wrote "
              << bundle.files.size() + 1 << " files to " << config.out_dir
              << " (" << passed << "/" << total << " checks passed)\n";
    if (!bundle.timing.is_null()) {
      const auto& warm = bundle.timing["warm"];
      std::cout << "warm tick: median " << warm["median_us"].get<double>()
                << " us, p99 " << warm["p99_us"].get<double>() << " us\n";
    }
  } catch (const softjoint::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidationError;
  } catch (const softjoint::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kValidationError;
  } catch (const softjoint::SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Antagonistic soft-joint experiments"};
  app.require_subcommand(1);
  Options options;
  std::optional<softjoint::Scenario> chosen;

  for (softjoint::Scenario s :
       {softjoint::Scenario::kIdentify, softjoint::Scenario::kDecoupleMap,
        softjoint::Scenario::kControllerCompare, softjoint::Scenario::kContact,
        softjoint::Scenario::kBench}) {
    CLI::App* sub = app.add_subcommand(softjoint::ScenarioName(s));
    sub->add_option("--config", options.config, "INI configuration file")
        ->required();
    sub->add_option("--out", options.out, "output directory");
    sub->add_option("--seed", options.seed, "overrides [experiment] seed");
    sub->callback([&chosen, s] { chosen = s; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationError;
  }
  return Run(*chosen, options);
}
