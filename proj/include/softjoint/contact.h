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

#ifndef SOFTJOINT_CONTACT_H_
#define SOFTJOINT_CONTACT_H_

// Contact-interaction trials: spring-damper surfaces, stiffness policies,
// the contact torque law, trial execution and settling metrics.

#include <iosfwd>
#include <string>
#include <vector>

#include "softjoint/controller.h"
#include "softjoint/joint_plant.h"

namespace softjoint {

struct Surface {
  double K_env = 5.0;          // N m / rad
  double D_env = 0.5;          // N m s / rad
  double theta_contact = 0.20;  // rad

  static Surface Soft() { return {5.0, 0.5, 0.20}; }
  static Surface Rigid() { return {500.0, 0.5, 0.20}; }
};

enum class PolicyKind { kDepthAdaptive, kFixedLow, kFixedHigh };

struct StiffnessPolicy {
  PolicyKind kind = PolicyKind::kDepthAdaptive;
  double K_low = 6.0;     // N m / rad
  double K_high = 20.0;   // N m / rad
  double alpha_d = 25.0;  // 1 / rad
  // Depth-adaptive only: K_low + (K_high - K_low) a d / (1 + a d) instead of
  // K_low + (K_high - K_low) / (1 + a d).
  bool increasing = false;

  static StiffnessPolicy DepthAdaptive(double k_low = 6.0, double k_high = 20.0,
                                       double alpha_d = 25.0) {
    return {PolicyKind::kDepthAdaptive, k_low, k_high, alpha_d, false};
  }
  static StiffnessPolicy FixedLow(double k = 6.0) {
    return {PolicyKind::kFixedLow, k, k, 25.0, false};
  }
  static StiffnessPolicy FixedHigh(double k = 20.0) {
    return {PolicyKind::kFixedHigh, k, k, 25.0, false};
  }
  void Validate() const;
};

std::string PolicyName(PolicyKind kind);  // "bio", "fixed_low", "fixed_high"

struct ContactMetrics {
  double peak = 0.0;       // N m
  double impulse = 0.0;    // N m s
  double t90 = 0.0;        // s
  double tau_exp = 0.0;    // s (infinity when the envelope does not decay)
  double stability = 0.0;  // %
  double theta_ss = 0.0;   // rad
};

// Non-adhesive spring-damper reaction; zero out of contact.
double ContactTorque(const Surface& surface, double theta, double theta_dot);

// `delta` is the penetration depth, clamped at zero before contact.
double DesiredStiffness(const StiffnessPolicy& policy, double delta);

struct ContactTorqueLaw {
  double preload_torque = 0.5;  // N m
  double B_eff = 0.5;           // N m s / rad
};

// T_des = preload + tau_g(theta) - B_eff theta_dot; independent of K_des.
double DesiredTorqueContact(double theta, double theta_dot,
                            const JointParams& joint,
                            const ContactTorqueLaw& law);

struct ContactTrialConfig {
  JointParams joint;
  MuscleModel muscle;           // per side, already scaled
  ControllerConfig controller;  // mode is forced to direct targets
  ContactTorqueLaw law;
  double D_imp = 3.0;           // policy-level damping, N m s / rad
  double dt = 1e-3;
  double horizon = 5.0;
  double approach_velocity = 4.0;  // rad/s
  double start_offset = 0.05;      // rad before the surface
};

struct TrialSample {
  double t = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  double T_des = 0.0;
  double K_des = 0.0;
  double tau_ext = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double K_est = 0.0;
};

struct TrialLog {
  std::vector<TrialSample> samples;
  bool aborted = false;
  std::string error;  // set when aborted
};

// Header: t,theta,theta_dot,T_des,K_des,tau_ext,alpha1,alpha2,K_est
void WriteTrialLogCsv(std::ostream& os, const TrialLog& log);
TrialLog ReadTrialLogCsv(std::istream& is);

// Runs one trial. A divergence or domain fault ends the trial early with
// `aborted` set and the partial log kept.
TrialLog RunContactTrial(const StiffnessPolicy& policy, const Surface& surface,
                         const ContactTrialConfig& config);

struct MetricsConfig {
  double theta_contact = 0.20;
  double peak_window = 0.020;      // s after first contact
  double impulse_start = 0.3;      // s
  double stability_start = 0.5;    // s
  double band_fraction = 0.02;
  double band_floor = 0.05;        // rad, lower bound of the band reference
  double steady_window = 0.5;      // s at the end used for theta_ss
};

// Throws Error when the log never reaches the surface.
ContactMetrics ComputeMetrics(const TrialLog& log, const MetricsConfig& config);

}  // namespace softjoint

#endif  // SOFTJOINT_CONTACT_H_
