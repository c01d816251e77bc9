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

#ifndef SOFTJOINT_CORE_MODEL_H_
#define SOFTJOINT_CORE_MODEL_H_

// Single-muscle physics: the Padé [2/1] base force law, actuator-specific
// activation mappings and the two-state (drive + series Kelvin-Voigt)
// muscle dynamics.

namespace softjoint {

// Strain interval the muscle is expected to operate in.
struct StrainInterval {
  double lo = -0.02;
  double hi = 0.12;
};

// F_base(z) = (c0 + c1 z + c2 z^2) / (1 + d1 z).
struct PadeCoefficients {
  double c0 = 0.0;  // N
  double c1 = 0.0;  // N
  double c2 = 0.0;  // N
  double d1 = 0.0;

  // Slope of the base curve at zero strain, c1 - c0 d1.
  double SmallStrainSlope() const { return c1 - c0 * d1; }

  // Identified HASEL coefficients.
  static PadeCoefficients Hasel() { return {6.804, -171.076, 1087.818, 5.674}; }
};

struct MuscleDynamicParams {
  double k_s = 0.0;    // series stiffness, N per unit strain
  double eta = 0.0;    // series damping, N s per unit strain
  double tau_a = 0.0;  // drive time constant, s

  // Throws ConfigError when a field is out of range.
  void Validate() const;

  static MuscleDynamicParams Hasel() { return {2370.9, 64.98, 0.040}; }
};

enum class ActuatorType { kPam, kHasel, kDea };

// Command -> normalized drive. PAMs are linear in pressure, HASELs and DEAs
// quadratic in voltage / field. `max_command` is P_max, V_max or E_max.
struct ActivationMap {
  ActuatorType type = ActuatorType::kHasel;
  double max_command = 1.0;

  static ActivationMap Pam(double p_max) { return {ActuatorType::kPam, p_max}; }
  static ActivationMap Hasel(double v_max) {
    return {ActuatorType::kHasel, v_max};
  }
  static ActivationMap Dea(double e_max) { return {ActuatorType::kDea, e_max}; }

  // Inverse of the mapping on [0, 1]: command producing activation `alpha`.
  double CommandFor(double alpha) const;
};

struct Activation {
  double alpha = 0.0;
  bool saturated = false;
};

struct MuscleState {
  double a = 0.0;  // drive level
  double x = 0.0;  // internal deformation (strain)
};

struct MuscleStepResult {
  MuscleState state;
  double force = 0.0;  // N
};

// Muscle with its full parameter set. Several identical units acting in
// parallel are represented by scaling forces, stiffness and damping.
struct MuscleModel {
  PadeCoefficients coeffs = PadeCoefficients::Hasel();
  MuscleDynamicParams dynamics = MuscleDynamicParams::Hasel();

  MuscleModel ScaledBy(double units) const;
};

// Throws DomainError when 1 + d1 z <= 0.
double BaseForce(const PadeCoefficients& c, double z);
double BaseForceDerivative(const PadeCoefficients& c, double z);

// g(a): identity clamped to [0, 1].
inline double ActivationOfDrive(double a) {
  return a < 0.0 ? 0.0 : (a > 1.0 ? 1.0 : a);
}

// alpha = g(phi(u)). Commands outside [0, max_command] are clamped and
// flagged.
Activation ActivationFromCommand(const ActivationMap& map, double u);

// Advances (a, x) by `dt` with the normalized drive target `drive` = phi(u)
// held constant over the step and the strain varying linearly,
// eps(t) = eps + eps_dot t. The drive state uses the exact first-order lag
// solution; x is integrated with sub-stepped RK4, or with 16 backward Euler
// sub-steps when RK4 would need more than 16. With eta == 0, or a series
// relaxation time far below dt, x is resolved algebraically from k_s (eps - x) = alpha F_base(x) by bisection.
// Returns the force k_s (eps - x) + eta (eps_dot - x_dot) at the end of the
// step.
MuscleStepResult MuscleStep(const MuscleState& state,
                            const MuscleDynamicParams& params,
                            const PadeCoefficients& coeffs, double drive,
                            double eps, double eps_dot, double dt);

// Same, converting the raw command through `map` first.
MuscleStepResult MuscleStep(const MuscleState& state,
                            const MuscleDynamicParams& params,
                            const PadeCoefficients& coeffs,
                            const ActivationMap& map, double u, double eps,
                            double eps_dot, double dt);

// True when x is resolved algebraically at this step size (eta == 0 or a
// series relaxation time eta / k_s below 1e-3 dt).
bool IsQuasiStaticSeries(const MuscleDynamicParams& params, double dt);

// Root of k_s (eps - x) = alpha F_base(x) to 1e-10 strain.
double SolveQuasiStaticDeformation(const MuscleDynamicParams& params,
                                   const PadeCoefficients& coeffs,
                                   double alpha, double eps);

struct ConstraintCheck {
  bool passed = true;
  double worst_z = 0.0;      // strain with the largest violation
  double worst_value = 0.0;  // violating quantity at worst_z
};

struct ConstraintReport {
  ConstraintCheck positivity;    // F_base >= 0
  ConstraintCheck monotonicity;  // F_base' <= 0 up to maximal contraction
  ConstraintCheck denominator;   // 1 + d1 z > 0
  ConstraintCheck near_zero;     // F_base(z_max) small vs. peak force
  double max_contraction = 0.0;  // z_max: strain of minimum force

  bool AllPassed() const {
    return positivity.passed && monotonicity.passed && denominator.passed &&
           near_zero.passed;
  }
};

// Dense-grid check of the physical shape constraints. Maximal contraction
// is the strain of least force on the interval; the curve must decay
// monotonically up to it and reach at most `near_zero_fraction` of its peak
// there.
ConstraintReport ValidateShapeConstraints(const PadeCoefficients& c,
                                          StrainInterval interval,
                                          int grid_points = 2001,
                                          double near_zero_fraction = 0.1);

}  // namespace softjoint

#endif  // SOFTJOINT_CORE_MODEL_H_
