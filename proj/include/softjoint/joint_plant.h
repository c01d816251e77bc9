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

#ifndef SOFTJOINT_JOINT_PLANT_H_
#define SOFTJOINT_JOINT_PLANT_H_

#include <functional>

#include "softjoint/core_model.h"

namespace softjoint {

struct JointParams {
  double r = 0.03;         // moment arm, m
  double L0 = 0.16;        // reference muscle length, m
  double J_eq = 0.2;       // kg m^2
  double B_j = 1.0;        // N m s / rad
  double K_j = 1.0;        // N m / rad, referenced to theta = 0
  double m_l = 1.0;        // kg
  double l_c = 0.1;        // m
  double theta_g = 0.0;    // rad
  double g_acc = 9.81;     // m / s^2
  double F_pre = 0.5;      // N, minimum tendon preload
  double max_velocity = 100.0;  // rad/s divergence guard

  // Strain per radian, r / L0.
  double xi() const { return r / L0; }
  void Validate() const;
};

struct JointState {
  double theta = 0.0;
  double theta_dot = 0.0;
  MuscleState muscle_1;
  MuscleState muscle_2;
};

struct ActivationPair {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
};

struct CoContractionBias {
  double c = 0.0;
  double b = 0.0;
};

// Muscle index is 1 or 2.
double StrainOf(const JointParams& p, double theta, int muscle_index);
double GravityTorque(const JointParams& p, double theta);
// d(tau_g)/d(theta).
double GravityStiffness(const JointParams& p, double theta);
// r (F1 - F2). Throws SlackError for a negative tendon force.
double MuscleTorque(const JointParams& p, double f1, double f2);

CoContractionBias ToCoContractionBias(ActivationPair alpha);
// Throws InfeasibleError unless |b| <= min(c, 1 - c).
ActivationPair FromCoContractionBias(CoContractionBias cb);

struct StiffnessBreakdown {
  double k_act_1 = 0.0;  // alpha_i |F_base'(x_i)|
  double k_act_2 = 0.0;
  double series = 0.0;   // K_s = k_s + eta / dt
  double k_step_1 = 0.0;
  double k_step_2 = 0.0;
  double active = 0.0;   // r xi (K_1,step + K_2,step)
  double total = 0.0;    // active + K_j + K_g(theta)
};

struct MuscleForces {
  double f1 = 0.0;
  double f2 = 0.0;
};

// Single-DOF joint driven by an antagonistic muscle pair.
class JointPlant {
 public:
  using ExternalTorque = std::function<double(double theta, double theta_dot)>;

  JointPlant(JointParams joint, MuscleModel muscle);
  JointPlant(JointParams joint, MuscleModel muscle_1, MuscleModel muscle_2);

  const JointParams& joint() const { return joint_; }
  const MuscleModel& muscle(int index) const {
    return index == 1 ? muscle_1_ : muscle_2_;
  }

  // State at rest at `theta` with both muscles quasi-statically loaded at
  // the given drive levels.
  JointState RestState(double theta, ActivationPair drive) const;

  // Force delivered by each muscle at `state`.
  MuscleForces Forces(const JointState& state) const;
  double Torque(const JointState& state) const;

  // Per-step joint stiffness with activations `alpha` acting at the
  // internal deformations of `state`. Throws DomainError for a degenerate
  // harmonic combination.
  StiffnessBreakdown Stiffness(const JointState& state, ActivationPair alpha,
                               double dt) const;

  // Advances (theta, theta_dot, a1, x1, a2, x2) by dt with the drive
  // targets held. Throws InstabilityError when |theta_dot| exceeds the
  // divergence guard or a deformation leaves the force-curve domain.
  JointState Step(const JointState& state, ActivationPair drive,
                  double tau_ext, double dt) const;
  // Same, with an external torque evaluated inside the integrator stages.
  JointState Step(const JointState& state, ActivationPair drive,
                  const ExternalTorque& tau_ext, double dt) const;

  // Advances only the muscle states with the joint held at state.theta
  // (theta_dot is forced to zero), as on a locked test bench.
  JointState StepLocked(const JointState& state, ActivationPair drive,
                        double dt) const;

  // Raises co-contraction minimally so both quasi-static muscle forces at
  // `theta` reach F_pre. Sets *feasible to false when that needs an
  // activation above 1 (the result is then clamped).
  ActivationPair ApplyPreload(double theta, ActivationPair alpha,
                              bool* feasible = nullptr) const;

  // Kinetic + passive spring + gravity potential energy.
  double PassiveEnergy(const JointState& state) const;

 private:
  JointParams joint_;
  MuscleModel muscle_1_;
  MuscleModel muscle_2_;
};

}  // namespace softjoint

#endif  // SOFTJOINT_JOINT_PLANT_H_
