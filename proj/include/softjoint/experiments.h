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

#ifndef SOFTJOINT_EXPERIMENTS_H_
#define SOFTJOINT_EXPERIMENTS_H_

// Config-driven experiment scenarios. Each run returns a ResultBundle of CSV
// files plus a JSON summary; identical config and seed give byte-identical
// bundles. The INI schema is documented in README.md.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "softjoint/contact.h"
#include "softjoint/controller.h"
#include "softjoint/core_model.h"
#include "softjoint/joint_plant.h"

namespace softjoint {

inline constexpr char kVersion[] = "0.1.0";

enum class Scenario {
  kIdentify,
  kDecoupleMap,
  kControllerCompare,
  kContact,
  kBench
};

std::string ScenarioName(Scenario scenario);
// Throws ConfigError for an unknown name.
Scenario ParseScenario(const std::string& name);

struct PlantSection {
  JointParams joint;
  MuscleModel muscle;  // one unit
  double muscle_units = 40.0;
  ActivationMap map = ActivationMap::Hasel(1.0);
  double dt = 1e-3;  // s, control and integration period

  MuscleModel ScaledMuscle() const { return muscle.ScaledBy(muscle_units); }
};

struct ControllerSection {
  bool feedback = true;
  double f_T = 3.0;
  double f_K = 1.0;
  double zeta = 1.2;
  double slew_max = 20.0;
  double lambda = 1e-4;
  int max_iterations = 8;
  bool preload = true;

  ControllerConfig ToConfig(const PlantSection& plant) const;
};

struct IdentifySection {
  // Input CSV trajectories; paths relative to the config file. Empty lists
  // mean synthetic data from the generator block. Without explicit test
  // files the last test_fraction of the transient trials is held out.
  std::vector<std::string> slow;
  std::vector<std::string> transient;
  std::vector<std::string> test;
  double test_fraction = 0.3;
  int starts = 16;
  bool joint_refinement = true;
  StrainInterval interval = {-0.02, 0.12};
};

struct GeneratorSection {
  double noise_std = 0.3;  // N
  double rate = 50.0;      // Hz
  std::vector<double> ramp_levels = {0.75, 0.85, 0.95, 1.0};  // activation
  double ramp_strain_lo = -0.02;
  double ramp_strain_hi = 0.10;
  double ramp_strain_rate = 0.008;  // 1/s
  int transient_trials = 14;
  double transient_duration = 10.0;  // s
  double transient_amplitude = 0.02;
};

struct DecoupleSection {
  double theta = 0.0;
  double c_min = 0.1;
  double c_max = 0.9;
  int c_points = 81;
  int b_points = 81;
  double fixed_c = 0.5;  // co-contraction of the bias sweep
};

// Locked-joint tracking of orthogonal (T_des, K_des) steps under output
// torque disturbances seen by the joint torque sensor.
struct CompareSection {
  std::vector<double> amplitudes = {0.0, 0.5, 1.0, 1.5};  // N m
  double duration = 10.0;                 // s
  double pulse_width = 1.0;               // s
  std::vector<double> pulse_starts = {2.0, 6.5};  // s, alternating sign
  double K_base = 10.0;                   // N m / rad
  double K_step = 4.0;                    // N m / rad
  double T_step = 0.2;                    // N m
  double transition = 1.0;                // s, raised-cosine ramp
  double T_up = 0.5, T_down = 3.5;        // s, torque step ramp starts
  double K_up = 5.5, K_down = 8.0;        // s, stiffness step ramp starts
};

struct ContactSection {
  Surface soft = Surface::Soft();
  Surface rigid = Surface::Rigid();
  double K_low = 6.0;
  double K_high = 20.0;
  double alpha_d = 25.0;
  bool adaptive_increasing = false;  // stiffness rising with depth
  ContactTorqueLaw law;
  double D_imp = 3.0;
  double horizon = 5.0;
  double approach_velocity = 4.0;
  double start_offset = 0.05;
  MetricsConfig metrics;
};

struct BenchSection {
  int ticks = 100000;
  double T_amplitude = 0.3;  // N m
  double K_mean = 10.0;      // N m / rad
  double K_amplitude = 3.0;  // N m / rad
  double period = 2.0;       // s
};

struct ExperimentConfig {
  Scenario scenario = Scenario::kContact;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::filesystem::path base_dir;  // resolves relative input paths
  // Every scenario needs [plant]; the other blocks depend on the scenario.
  // Absent blocks stay empty.
  std::optional<PlantSection> plant;
  std::optional<ControllerSection> controller;
  std::optional<IdentifySection> identify;
  std::optional<GeneratorSection> generator;
  std::optional<DecoupleSection> decouple;
  std::optional<CompareSection> compare;
  std::optional<ContactSection> contact;
  std::optional<BenchSection> bench;
  std::string source;  // config text, hashed into the summary

  // Throws ConfigError when a block the scenario needs is missing or a
  // value is out of range.
  void Validate() const;
};

// Parses INI text. Unknown sections or keys, malformed numbers and
// duplicate keys throw ConfigError; `base_dir` is recorded for input paths.
// With `scenario` set, [experiment] scenario may be omitted but must match
// when present.
ExperimentConfig ParseConfig(std::istream& is,
                             const std::filesystem::path& base_dir = {},
                             std::optional<Scenario> scenario = std::nullopt);
ExperimentConfig LoadConfig(const std::filesystem::path& path,
                            std::optional<Scenario> scenario = std::nullopt);

struct ResultBundle {
  Scenario scenario = Scenario::kContact;
  // Ordered (file name, contents) pairs; summary.json is not among them.
  std::vector<std::pair<std::string, std::string>> files;
  nlohmann::json summary;
  // Wall-clock measurements (bench only). Written to timing.json and kept
  // out of the deterministic bundle.
  nlohmann::json timing;

  // Throws Error when `name` is absent.
  const std::string& File(const std::string& name) const;
  std::string SummaryText() const;
};

// Writes every file, summary.json and (if present) timing.json into `dir`,
// creating it as needed.
void WriteBundle(const ResultBundle& bundle, const std::filesystem::path& dir);

std::string Sha256Hex(const std::string& data);

ResultBundle RunIdentify(const ExperimentConfig& config);
ResultBundle RunDecoupleMap(const ExperimentConfig& config);
ResultBundle RunControllerCompare(const ExperimentConfig& config);
ResultBundle RunContactMatrix(const ExperimentConfig& config);
ResultBundle RunBench(const ExperimentConfig& config);

// Validates, then dispatches on config.scenario.
ResultBundle RunScenario(const ExperimentConfig& config);

// One controller-comparison run on the locked joint.
struct CompareRun {
  double amplitude = 0.0;
  bool feedback = false;
  double rmse_T = 0.0;
  double rmse_K = 0.0;
  // Columns: t,T_des,K_des,T_meas,K_est,tau_d,alpha1,alpha2
  std::vector<std::vector<double>> log;
};

CompareRun RunCompareTrial(const PlantSection& plant,
                           const ControllerSection& controller,
                           const CompareSection& compare, double amplitude,
                           bool feedback);

// Root-mean-square of a - b over paired entries.
double Rmse(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace softjoint

#endif  // SOFTJOINT_EXPERIMENTS_H_
