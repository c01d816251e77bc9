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


#ifndef SOFTJOINT_IDENTIFICATION_H_
#define SOFTJOINT_IDENTIFICATION_H_

// Two-stage identification of a single muscle: Padé coefficients from slow,
// high-activation data, then the series and activation dynamics from
// transient data by simulation-error minimization.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "softjoint/core_model.h"

namespace softjoint {

struct TrajectorySample {
  double t = 0.0;        // s
  double u = 0.0;        // normalized command
  double F = 0.0;        // N
  double eps = 0.0;      // strain
  double eps_dot = 0.0;  // 1/s
};

// Uniformly sampled muscle recording. Between samples the command is held
// and the strain varies linearly.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  double rate = 50.0;  // Hz

  double dt() const { return 1.0 / rate; }
  // Throws SchemaError unless times increase strictly with spacing 1 / rate
  // (within 1e-6 s) and every value is finite.
  void Validate() const;
};

// CSV with header `t,u,F,eps,eps_dot`. The rate is inferred from the first
// interval. Throws ParseError (with line) or SchemaError.
Trajectory ReadTrajectory(std::istream& is);
Trajectory LoadTrajectory(const std::string& path);
void WriteTrajectory(std::ostream& os, const Trajectory& trajectory);

// Command and strain samples on a common uniform grid starting at t = 0.
struct ExcitationProfile {
  double rate = 50.0;
  std::vector<double> u;
  std::vector<double> eps;
};

// Command held at `u` while the strain ramps lo -> hi -> lo at `eps_rate`.
ExcitationProfile RampProfile(double u, double eps_lo, double eps_hi,
                              double eps_rate, double rate = 50.0);

// Command steps alternating between the lower fifth (0.1-0.3 s) and the
// upper fifth (0.5-1.0 s) of [0, max_command] over a 0.7 Hz + 4.1 Hz strain
// oscillation around `eps_mean`. Deterministic in `seed`.
ExcitationProfile TransientProfile(double duration, double eps_mean,
                                   double eps_amplitude, double max_command,
                                   std::uint64_t seed, double rate = 50.0);

// Simulated force at every grid point. The muscle starts at rest on the
// first command and strain; each interval is integrated in `substeps`
// muscle steps.
std::vector<double> SimulateForce(const MuscleModel& model,
                                  const ActivationMap& map,
                                  const ExcitationProfile& profile,
                                  int substeps);

// Forward simulation at rate * substeps, sampled at `rate`, with seeded
// Gaussian force noise. Throws ConfigError on mismatched profile lengths.
Trajectory SynthesizeTrajectory(const MuscleModel& model,
                                const ActivationMap& map,
                                const ExcitationProfile& profile,
                                double noise_std, std::uint64_t seed,
                                int substeps = 40);

ExcitationProfile ProfileOf(const Trajectory& trajectory);

// Per-start outcome of a multi-start fit.
struct StartDiagnostics {
  std::vector<double> initial;
  std::vector<double> final;
  double objective = 0.0;
  int iterations = 0;
  bool feasible = false;
};

struct QuasiStaticOptions {
  ActivationMap map = ActivationMap::Hasel(1.0);
  double max_strain_rate = 0.01;  // 1/s
  double min_activation = 0.7;
  // Constraint interval; empty (lo >= hi) means the strain range of the
  // selected samples.
  StrainInterval interval = {0.0, 0.0};
  int starts = 16;
  std::uint64_t seed = 1;
  int max_iterations = 4000;
  // When set, the active-element strain is recovered by integrating the
  // series branch driven by the measured force. Otherwise it is taken as
  // x = eps - F / k_s with k_s fitted alongside the curve (or x = eps when
  // fit_series_stiffness is false).
  std::optional<MuscleDynamicParams> series;
  bool fit_series_stiffness = true;
  double k_s_lower = 100.0;  // start range for the fitted k_s
  double k_s_upper = 1e5;
  // Replaces the linearized least-squares solution as the first start.
  std::optional<PadeCoefficients> initial;
};

struct QuasiStaticFit {
  PadeCoefficients coeffs;
  double objective = 0.0;  // sum of squared F / alpha residuals
  std::optional<double> series_stiffness;  // k_s when fitted here
  int samples = 0;
  StrainInterval interval;
  ConstraintReport constraints;
  std::vector<double> trace;  // best objective per iteration, winning start
  std::vector<StartDiagnostics> starts;
};

// Throws InsufficientDataError below 32 usable samples and FitError when no
// start ends on a curve that satisfies the shape constraints.
QuasiStaticFit FitQuasiStatic(const std::vector<Trajectory>& data,
                              const QuasiStaticOptions& options);

struct DynamicsOptions {
  ActivationMap map = ActivationMap::Hasel(1.0);
  int starts = 16;
  std::uint64_t seed = 1;
  int max_iterations = 600;
  int substeps = 1;
  // Log-uniform start box; the search itself is unbounded in log space, so
  // every candidate has k_s, eta, tau_a > 0.
  MuscleDynamicParams lower = {100.0, 1.0, 0.005};
  MuscleDynamicParams upper = {20000.0, 500.0, 0.3};
  double condition_limit = 1e8;
  // Used as the first start instead of a random draw.
  std::optional<MuscleDynamicParams> initial;
};

struct DynamicsFit {
  MuscleDynamicParams params;
  double objective = 0.0;  // sum of squared force residuals
  std::vector<double> trace;
  std::vector<StartDiagnostics> starts;
  double condition_number = 0.0;  // of the log-parameter sensitivity
  bool ill_conditioned = false;
  std::string warning;
};

// Throws InsufficientDataError below 24 samples and FitError when every
// start fails.
DynamicsFit FitDynamics(const std::vector<Trajectory>& data,
                        const PadeCoefficients& coeffs,
                        const DynamicsOptions& options);

struct FitReport {
  double rmse = 0.0;       // N
  double r_squared = 0.0;  // about the measured mean
  std::vector<double> residuals;  // predicted - measured, all samples
  ConstraintReport constraints;
};

struct IdentificationOptions {
  ActivationMap map = ActivationMap::Hasel(1.0);
  int starts = 16;
  std::uint64_t seed = 1;
  QuasiStaticOptions quasi_static;  // map, starts and seed are overridden
  DynamicsOptions dynamics;         // likewise
  // Final simulation-error polish of all seven parameters on all data.
  bool joint_refinement = true;
  int joint_max_iterations = 3000;
};

struct IdentificationResult {
  MuscleModel model;
  QuasiStaticFit quasi_static;  // final pass
  DynamicsFit dynamics;         // final pass
  QuasiStaticFit quasi_static_initial;
  DynamicsFit dynamics_initial;
  std::vector<double> joint_trace;  // empty without joint refinement
};

// Multi-start Pade + series stiffness fit on the slow data, multi-start
// dynamics fit on the transient data, then one refinement of each stage:
// the curve is refit on deformations recovered with the fitted series
// branch, and the dynamics are refit from the previous estimate.
IdentificationResult Identify(const std::vector<Trajectory>& slow,
                              const std::vector<Trajectory>& transient,
                              const IdentificationOptions& options);

FitReport EvaluateFit(const MuscleModel& model, const ActivationMap& map,
                      const std::vector<Trajectory>& data,
                      StrainInterval interval, int substeps = 1);

// Residual statistics for arbitrary predictions.
FitReport ScorePredictions(const std::vector<double>& predicted,
                           const std::vector<double>& measured);

}  // namespace softjoint

#endif  // SOFTJOINT_IDENTIFICATION_H_
