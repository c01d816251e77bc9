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

#include "softjoint/joint_plant.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "softjoint/errors.h"

namespace softjoint {
namespace {

constexpr double kMaxStageRate = 0.5;
constexpr int kMaxSubsteps = 64;
constexpr double kFeasibilitySlack = 1e-12;

// Muscle 1 pulls toward +theta and shortens (positive strain) as theta grows.
double Sign(int muscle_index) { return muscle_index == 1 ? 1.0 : -1.0; }

void CheckIndex(int muscle_index) {
  if (muscle_index != 1 && muscle_index != 2) {
    throw ConfigError("muscle index must be 1 or 2");
  }
}

double HarmonicStiffness(double k_act, double k_series) {
  const double sum = k_act + k_series;
  if (!(sum > 0.0)) {
    if (k_act == 0.0 && k_series == 0.0) return 0.0;
    throw DomainError("degenerate muscle stiffness: k_act + K_s <= 0", sum);
  }
  return k_act * k_series / sum;
}

}  // namespace

void JointParams::Validate() const {
  if (!(r > 0.0) || !(L0 > 0.0) || !(J_eq > 0.0)) {
    throw ConfigError("joint r, L0 and J_eq must be > 0");
  }
  if (!(B_j >= 0.0) || !(K_j >= 0.0) || !(F_pre >= 0.0)) {
    throw ConfigError("joint B_j, K_j and F_pre must be >= 0");
  }
  if (!(max_velocity > 0.0)) throw ConfigError("max_velocity must be > 0");
}

double StrainOf(const JointParams& p, double theta, int muscle_index) {
  CheckIndex(muscle_index);
  return Sign(muscle_index) * p.xi() * theta;
}

double GravityTorque(const JointParams& p, double theta) {
  return p.m_l * p.g_acc * p.l_c * std::sin(theta - p.theta_g);
}

double GravityStiffness(const JointParams& p, double theta) {
  return p.m_l * p.g_acc * p.l_c * std::cos(theta - p.theta_g);
}

double MuscleTorque(const JointParams& p, double f1, double f2) {
  if (f1 < 0.0 || f2 < 0.0) {
    std::ostringstream msg;
    msg << "tendon cannot push: F1 = " << f1 << ", F2 = " << f2
        << " (slack / preload fault)";
    throw SlackError(msg.str());
  }
  return p.r * (f1 - f2);
}

CoContractionBias ToCoContractionBias(ActivationPair alpha) {
  return {0.5 * (alpha.alpha1 + alpha.alpha2),
          0.5 * (alpha.alpha1 - alpha.alpha2)};
}

ActivationPair FromCoContractionBias(CoContractionBias cb) {
  if (std::abs(cb.b) > cb.c + kFeasibilitySlack) {
    std::ostringstream msg;
    msg << "infeasible coordinates: |b| = " << std::abs(cb.b)
        << " exceeds c = " << cb.c << " (an activation would be negative)";
    throw InfeasibleError(msg.str());
  }
  if (std::abs(cb.b) > 1.0 - cb.c + kFeasibilitySlack) {
    std::ostringstream msg;
    msg << "infeasible coordinates: |b| = " << std::abs(cb.b)
        << " exceeds 1 - c = " << 1.0 - cb.c
        << " (an activation would exceed 1)";
    throw InfeasibleError(msg.str());
  }
  return {cb.c + cb.b, cb.c - cb.b};
}

JointPlant::JointPlant(JointParams joint, MuscleModel muscle)
    : JointPlant(joint, muscle, muscle) {}

JointPlant::JointPlant(JointParams joint, MuscleModel muscle_1,
                       MuscleModel muscle_2)
    : joint_(joint), muscle_1_(muscle_1), muscle_2_(muscle_2) {
  joint_.Validate();
  muscle_1_.dynamics.Validate();
  muscle_2_.dynamics.Validate();
}

JointState JointPlant::RestState(double theta, ActivationPair drive) const {
  JointState s;
  s.theta = theta;
  s.muscle_1.a = drive.alpha1;
  s.muscle_2.a = drive.alpha2;
  auto rest_x = [&](const MuscleModel& m, double a, int index) {
    const double eps = StrainOf(joint_, theta, index);
    if (m.dynamics.k_s == 0.0) return eps;
    return SolveQuasiStaticDeformation(m.dynamics, m.coeffs,
                                       ActivationOfDrive(a), eps);
  };
  s.muscle_1.x = rest_x(muscle_1_, drive.alpha1, 1);
  s.muscle_2.x = rest_x(muscle_2_, drive.alpha2, 2);
  return s;
}

MuscleForces JointPlant::Forces(const JointState& state) const {
  return {ActivationOfDrive(state.muscle_1.a) *
              BaseForce(muscle_1_.coeffs, state.muscle_1.x),
          ActivationOfDrive(state.muscle_2.a) *
              BaseForce(muscle_2_.coeffs, state.muscle_2.x)};
}

double JointPlant::Torque(const JointState& state) const {
  const MuscleForces f = Forces(state);
  return MuscleTorque(joint_, f.f1, f.f2);
}

StiffnessBreakdown JointPlant::Stiffness(const JointState& state,
                                         ActivationPair alpha,
                                         double dt) const {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  StiffnessBreakdown k;
  k.k_act_1 = alpha.alpha1 *
              std::abs(BaseForceDerivative(muscle_1_.coeffs, state.muscle_1.x));
  k.k_act_2 = alpha.alpha2 *
              std::abs(BaseForceDerivative(muscle_2_.coeffs, state.muscle_2.x));
  const double series_1 = muscle_1_.dynamics.k_s + muscle_1_.dynamics.eta / dt;
  const double series_2 = muscle_2_.dynamics.k_s + muscle_2_.dynamics.eta / dt;
  k.series = series_1;
  k.k_step_1 = HarmonicStiffness(k.k_act_1, series_1);
  k.k_step_2 = HarmonicStiffness(k.k_act_2, series_2);
  k.active = joint_.r * joint_.xi() * (k.k_step_1 + k.k_step_2);
  k.total = k.active + joint_.K_j + GravityStiffness(joint_, state.theta);
  return k;
}

JointState JointPlant::Step(const JointState& state, ActivationPair drive,
                            double tau_ext, double dt) const {
  return Step(
      state, drive, [tau_ext](double, double) { return tau_ext; }, dt);
}

JointState JointPlant::Step(const JointState& state, ActivationPair drive,
                            const ExternalTorque& tau_ext, double dt) const {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  const std::array<const MuscleModel*, 2> muscles = {&muscle_1_, &muscle_2_};
  const std::array<double, 2> a0 = {state.muscle_1.a, state.muscle_2.a};
  const std::array<double, 2> target = {drive.alpha1, drive.alpha2};
  std::array<bool, 2> algebraic{};
  for (int i = 0; i < 2; ++i) {
    algebraic[i] = IsQuasiStaticSeries(muscles[i]->dynamics, dt);
  }

  auto drive_at = [&](int i, double t) {
    return target[i] +
           (a0[i] - target[i]) * std::exp(-t / muscles[i]->dynamics.tau_a);
  };

  // y = (theta, theta_dot, x1, x2).
  using Vec = std::array<double, 4>;
  auto deformation = [&](int i, double alpha, double theta, double x) {
    if (!algebraic[i]) return x;
    const double eps = StrainOf(joint_, theta, i + 1);
    return SolveQuasiStaticDeformation(muscles[i]->dynamics,
                                       muscles[i]->coeffs, alpha, eps);
  };
  auto rates = [&](double t, const Vec& y) {
    Vec dy{};
    const double theta = y[0];
    const double theta_dot = y[1];
    std::array<double, 2> force{};
    for (int i = 0; i < 2; ++i) {
      const MuscleModel& m = *muscles[i];
      const double alpha = ActivationOfDrive(drive_at(i, t));
      const double x = deformation(i, alpha, theta, y[2 + i]);
      force[i] = alpha * BaseForce(m.coeffs, x);
      if (algebraic[i]) {
        dy[2 + i] = 0.0;
      } else {
        const double eps = StrainOf(joint_, theta, i + 1);
        const double eps_dot = StrainOf(joint_, theta_dot, i + 1);
        dy[2 + i] =
            eps_dot + (m.dynamics.k_s * (eps - x) - force[i]) / m.dynamics.eta;
      }
    }
    const double torque = MuscleTorque(joint_, force[0], force[1]) +
                          tau_ext(theta, theta_dot) - joint_.B_j * theta_dot -
                          joint_.K_j * theta - GravityTorque(joint_, theta);
    dy[0] = theta_dot;
    dy[1] = torque / joint_.J_eq;
    return dy;
  };

  // Sub-step count from the fastest local rate.
  double fastest = joint_.B_j / joint_.J_eq;
  {
    const double h = 1e-6;
    const double k_ext =
        std::abs(tau_ext(state.theta + h, state.theta_dot) -
                 tau_ext(state.theta - h, state.theta_dot)) /
        (2.0 * h);
    const double d_ext =
        std::abs(tau_ext(state.theta, state.theta_dot + h) -
                 tau_ext(state.theta, state.theta_dot - h)) /
        (2.0 * h);
    double k_joint = joint_.K_j +
                     std::abs(GravityStiffness(joint_, state.theta)) + k_ext;
    const std::array<double, 2> x0 = {state.muscle_1.x, state.muscle_2.x};
    for (int i = 0; i < 2; ++i) {
      const MuscleModel& m = *muscles[i];
      const double k_act = std::max(ActivationOfDrive(a0[i]),
                                    ActivationOfDrive(target[i])) *
                           std::abs(BaseForceDerivative(m.coeffs, x0[i]));
      k_joint += joint_.r * joint_.xi() * k_act;
      if (!algebraic[i]) {
        fastest = std::max(fastest, (m.dynamics.k_s + k_act) / m.dynamics.eta);
      }
    }
    fastest = std::max(fastest, std::sqrt(k_joint / joint_.J_eq) +
                                    (joint_.B_j + d_ext) / joint_.J_eq);
  }
  const int substeps = std::clamp(
      static_cast<int>(std::ceil(dt * fastest / kMaxStageRate)), 1,
      kMaxSubsteps);
  const double h = dt / substeps;

  Vec y = {state.theta, state.theta_dot, state.muscle_1.x, state.muscle_2.x};
  auto diverged = [&](const std::string& detail) {
    std::ostringstream msg;
    msg << "joint diverged: " << detail << ", drive = (" << drive.alpha1
        << ", " << drive.alpha2 << "), previous theta = " << state.theta;
    return InstabilityError(msg.str());
  };
  // A runaway stage can carry a deformation past the force-curve pole.
  JointState out;
  try {
    for (int s = 0; s < substeps; ++s) {
      const double t = s * h;
      const Vec k1 = rates(t, y);
      Vec tmp{};
      for (int j = 0; j < 4; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
      const Vec k2 = rates(t + 0.5 * h, tmp);
      for (int j = 0; j < 4; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
      const Vec k3 = rates(t + 0.5 * h, tmp);
      for (int j = 0; j < 4; ++j) tmp[j] = y[j] + h * k3[j];
      const Vec k4 = rates(t + h, tmp);
      for (int j = 0; j < 4; ++j) {
        y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
      }
    }
    out.theta = y[0];
    out.theta_dot = y[1];
    out.muscle_1.a = drive_at(0, dt);
    out.muscle_2.a = drive_at(1, dt);
    out.muscle_1.x =
        deformation(0, ActivationOfDrive(out.muscle_1.a), y[0], y[2]);
    out.muscle_2.x =
        deformation(1, ActivationOfDrive(out.muscle_2.a), y[0], y[3]);
  } catch (const DomainError& e) {
    throw diverged(e.what());
  }

  if (!std::isfinite(out.theta) || !std::isfinite(out.theta_dot) ||
      std::abs(out.theta_dot) > joint_.max_velocity) {
    std::ostringstream detail;
    detail << "theta = " << out.theta << " rad, theta_dot = " << out.theta_dot
           << " rad/s (guard " << joint_.max_velocity << ")";
    throw diverged(detail.str());
  }
  return out;
}

JointState JointPlant::StepLocked(const JointState& state,
                                  ActivationPair drive, double dt) const {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  JointState out = state;
  out.theta_dot = 0.0;
  out.muscle_1 = MuscleStep(state.muscle_1, muscle_1_.dynamics,
                            muscle_1_.coeffs, drive.alpha1,
                            StrainOf(joint_, state.theta, 1), 0.0, dt)
                     .state;
  out.muscle_2 = MuscleStep(state.muscle_2, muscle_2_.dynamics,
                            muscle_2_.coeffs, drive.alpha2,
                            StrainOf(joint_, state.theta, 2), 0.0, dt)
                     .state;
  return out;
}

ActivationPair JointPlant::ApplyPreload(double theta, ActivationPair alpha,
                                        bool* feasible) const {
  double raise = 0.0;
  const std::array<double, 2> current = {alpha.alpha1, alpha.alpha2};
  const std::array<const MuscleModel*, 2> muscles = {&muscle_1_, &muscle_2_};
  bool ok = true;
  for (int i = 0; i < 2; ++i) {
    const double f = BaseForce(muscles[i]->coeffs, StrainOf(joint_, theta, i + 1));
    if (joint_.F_pre <= 0.0) continue;
    if (!(f > 0.0)) {
      ok = false;
      continue;
    }
    raise = std::max(raise, joint_.F_pre / f - current[i]);
  }
  ActivationPair out = {alpha.alpha1 + raise, alpha.alpha2 + raise};
  if (out.alpha1 > 1.0 || out.alpha2 > 1.0) ok = false;
  out.alpha1 = std::clamp(out.alpha1, 0.0, 1.0);
  out.alpha2 = std::clamp(out.alpha2, 0.0, 1.0);
  if (feasible != nullptr) *feasible = ok;
  return out;
}

double JointPlant::PassiveEnergy(const JointState& state) const {
  const double mgl = joint_.m_l * joint_.g_acc * joint_.l_c;
  return 0.5 * joint_.J_eq * state.theta_dot * state.theta_dot +
         0.5 * joint_.K_j * state.theta * state.theta +
         mgl * (1.0 - std::cos(state.theta - joint_.theta_g));
}

}  // namespace softjoint
