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

#include "softjoint/controller.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "softjoint/errors.h"

namespace softjoint {
namespace {

constexpr double kSaturationEps = 1e-12;

ActivationPair Clamp01(ActivationPair a) {
  return {std::clamp(a.alpha1, 0.0, 1.0), std::clamp(a.alpha2, 0.0, 1.0)};
}

int PinDirection(double final_value, double proposed) {
  if (final_value < proposed - kSaturationEps) return 1;
  if (final_value > proposed + kSaturationEps) return -1;
  return 0;
}

}  // namespace

void CommandLimits::Validate() const {
  for (int i = 0; i < 2; ++i) {
    if (!(alpha_min[i] >= 0.0) || !(alpha_max[i] <= 1.0) ||
        !(alpha_min[i] <= alpha_max[i])) {
      throw ConfigError("activation limits must satisfy 0 <= min <= max <= 1");
    }
  }
  if (!(slew_max > 0.0)) throw ConfigError("slew_max must be > 0");
}

double OuterImpedance(double theta_r, double theta_dot_r, double theta,
                      double theta_dot, const ImpedanceGains& gains,
                      const JointParams& params) {
  return gains.K_imp * (theta_r - theta) +
         gains.D_imp * (theta_dot_r - theta_dot) +
         GravityTorque(params, theta);
}

Eigen::Vector2d PlantOutputs(const JointPlant& plant, ActivationPair alpha,
                             const JointState& state, double dt) {
  const JointParams& p = plant.joint();
  const double f1 = BaseForce(plant.muscle(1).coeffs, state.muscle_1.x);
  const double f2 = BaseForce(plant.muscle(2).coeffs, state.muscle_2.x);
  const StiffnessBreakdown k = plant.Stiffness(state, alpha, dt);
  return {p.r * (alpha.alpha1 * f1 - alpha.alpha2 * f2), k.active};
}

Eigen::Matrix2d OutputJacobian(const JointPlant& plant, ActivationPair alpha,
                               const JointState& state, double dt) {
  const JointParams& p = plant.joint();
  const std::array<double, 2> x = {state.muscle_1.x, state.muscle_2.x};
  const std::array<double, 2> a = {alpha.alpha1, alpha.alpha2};
  Eigen::Matrix2d jac;
  for (int i = 0; i < 2; ++i) {
    const MuscleModel& m = plant.muscle(i + 1);
    const double sign = i == 0 ? 1.0 : -1.0;
    jac(0, i) = sign * p.r * BaseForce(m.coeffs, x[i]);
    const double slope = std::abs(BaseForceDerivative(m.coeffs, x[i]));
    const double series = m.dynamics.k_s + m.dynamics.eta / dt;
    const double k_act = a[i] * slope;
    const double sum = k_act + series;
    // d/dk [k Ks / (k + Ks)] = Ks^2 / (k + Ks)^2.
    const double dk = sum > 0.0 ? series * series / (sum * sum) : 0.0;
    jac(1, i) = p.r * p.xi() * dk * slope;
  }
  return jac;
}

InnerSolution InnerSolve(const JointPlant& plant, const ControlTargets& targets,
                         const JointState& state, ActivationPair warm_start,
                         double dt, const InnerSolverOptions& options) {
  const JointParams& p = plant.joint();
  const Eigen::Vector2d y_des(
      targets.T_des,
      targets.K_des - p.K_j - GravityStiffness(p, state.theta));
  const Eigen::Vector2d scale(1.0 / options.torque_scale,
                              1.0 / options.stiffness_scale);

  auto residual = [&](ActivationPair a) -> Eigen::Vector2d {
    return scale.cwiseProduct(PlantOutputs(plant, a, state, dt) - y_des);
  };

  InnerSolution best;
  best.alpha = Clamp01(warm_start);
  Eigen::Vector2d e = residual(best.alpha);
  best.residual = e.norm();
  ActivationPair alpha = best.alpha;

  for (int it = 1; it <= options.max_iterations; ++it) {
    best.iterations = it;
    if (e.norm() < options.tolerance) break;
    const Eigen::Matrix2d jac =
        scale.asDiagonal() * OutputJacobian(plant, alpha, state, dt);
    const Eigen::Matrix2d normal =
        jac.transpose() * jac +
        options.lambda * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d step = -normal.ldlt().solve(jac.transpose() * e);

    // Projected step with backtracking; keep the best iterate seen.
    double t = 1.0;
    ActivationPair trial;
    Eigen::Vector2d e_trial;
    for (int k = 0; k < 6; ++k, t *= 0.5) {
      trial = Clamp01({alpha.alpha1 + t * step(0), alpha.alpha2 + t * step(1)});
      e_trial = residual(trial);
      if (e_trial.norm() < e.norm()) break;
    }
    if (!(e_trial.norm() < e.norm())) break;  // no descent left on the box
    alpha = trial;
    e = e_trial;
    if (e.norm() < best.residual) {
      best.alpha = alpha;
      best.residual = e.norm();
    }
  }
  best.feasible = best.residual <= options.feasibility_tolerance;
  return best;
}

PiOutput PiUpdate(const PiState& pi, double e_T, double e_K, double dt,
                  Saturation saturation) {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  PiOutput out;
  out.state = pi;
  PiState& s = out.state;
  const double prev_T = pi.primed ? pi.last_e_T : e_T;
  const double prev_K = pi.primed ? pi.last_e_K : e_K;

  auto pushes_into = [](int pinned, double gain, double e) {
    if (pinned == 0) return false;
    const double push = gain * e;
    return (pinned > 0 && push > 0.0) || (pinned < 0 && push < 0.0);
  };

  if (!pushes_into(saturation.b, pi.gains.ki_T, e_T)) {
    s.integral_T += 0.5 * dt * (e_T + prev_T);
  }
  if (!pushes_into(saturation.c, pi.gains.ki_K, e_K)) {
    s.integral_K += 0.5 * dt * (e_K + prev_K);
  }
  s.integral_T = std::clamp(s.integral_T, -s.integral_T_max, s.integral_T_max);
  s.integral_K = std::clamp(s.integral_K, -s.integral_K_max, s.integral_K_max);
  s.last_e_T = e_T;
  s.last_e_K = e_K;
  s.primed = true;

  out.delta_b = s.gains.kp_T * e_T + s.gains.ki_T * s.integral_T;
  out.delta_c = s.gains.kp_K * e_K + s.gains.ki_K * s.integral_K;
  return out;
}

Eigen::Matrix2d CoContractionBiasSensitivity(const Eigen::Matrix2d& jacobian) {
  Eigen::Matrix2d to_alpha;
  // alpha = [1 1; 1 -1] (c, b).
  to_alpha << 1.0, 1.0, 1.0, -1.0;
  return jacobian * to_alpha;
}

PiGains DesignPiGains(const Eigen::Matrix2d& sensitivity_cb, double f_T,
                      double f_K, double zeta) {
  const double s_T = sensitivity_cb(0, 1);
  const double s_K = sensitivity_cb(1, 0);
  if (s_T == 0.0) {
    throw ConfigError("torque channel locally uncontrollable (dT/db = 0)");
  }
  if (s_K == 0.0) {
    throw ConfigError("stiffness channel locally uncontrollable (dK/dc = 0)");
  }
  if (!(f_T > 0.0) || !(f_K > 0.0) || !(zeta > 0.0)) {
    throw ConfigError("loop bandwidths and damping ratio must be > 0");
  }
  const double w_T = 2.0 * std::numbers::pi * f_T;
  const double w_K = 2.0 * std::numbers::pi * f_K;
  PiGains g;
  g.kp_T = 2.0 * zeta * w_T / s_T;
  g.ki_T = w_T * w_T / s_T;
  g.kp_K = 2.0 * zeta * w_K / s_K;
  g.ki_K = w_K * w_K / s_K;
  return g;
}

LimitedCommand ApplyCommandLimits(const CommandLimits& limits,
                                  ActivationPair proposed,
                                  ActivationPair previous, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  const auto& lo = limits.alpha_min;
  const auto& hi = limits.alpha_max;
  const CoContractionBias want = ToCoContractionBias(proposed);

  // Keep c inside the range where some b is admissible, then project b.
  CoContractionBias cb = want;
  cb.c = std::clamp(cb.c, 0.5 * (lo[0] + lo[1]), 0.5 * (hi[0] + hi[1]));
  const double b_lo = std::max(lo[0] - cb.c, cb.c - hi[1]);
  const double b_hi = std::min(hi[0] - cb.c, cb.c - lo[1]);
  cb.b = std::clamp(cb.b, b_lo, std::max(b_lo, b_hi));
  const bool inside = proposed.alpha1 >= lo[0] && proposed.alpha1 <= hi[0] &&
                      proposed.alpha2 >= lo[1] && proposed.alpha2 <= hi[1];
  ActivationPair boxed = proposed;
  if (!inside) {
    boxed = {std::clamp(cb.c + cb.b, lo[0], hi[0]),
             std::clamp(cb.c - cb.b, lo[1], hi[1])};
  }

  // Uniform scaling of the change keeps its direction in (c, b).
  const double max_change = limits.slew_max * dt;
  const double d1 = boxed.alpha1 - previous.alpha1;
  const double d2 = boxed.alpha2 - previous.alpha2;
  const double largest = std::max(std::abs(d1), std::abs(d2));
  const double scale = largest > max_change ? max_change / largest : 1.0;

  LimitedCommand out;
  out.alpha = {previous.alpha1 + scale * d1, previous.alpha2 + scale * d2};
  if (scale == 1.0) out.alpha = boxed;
  const CoContractionBias got = ToCoContractionBias(out.alpha);
  out.saturation.c = PinDirection(got.c, want.c);
  out.saturation.b = PinDirection(got.b, want.b);
  return out;
}

Controller::Controller(const JointPlant& plant, ControllerConfig config)
    : plant_(plant), config_(config) {
  config_.limits.Validate();
  const ActivationPair design = FromCoContractionBias(config_.design_point);
  const JointState at = plant_.RestState(config_.design_theta, design);
  const double dt_design = 1e-3;
  const Eigen::Matrix2d sens = CoContractionBiasSensitivity(
      OutputJacobian(plant_, design, at, dt_design));
  pi_.gains = DesignPiGains(sens, config_.f_T, config_.f_K, config_.zeta);
  Reset(last_cmd_);
}

void Controller::Reset(ActivationPair alpha) {
  last_ff_ = alpha;
  last_cmd_ = alpha;
  last_saturation_ = {};
  const PiGains gains = pi_.gains;
  pi_ = PiState{};
  pi_.gains = gains;
  pi_.integral_T_max = config_.integral_authority / std::abs(gains.ki_T);
  pi_.integral_K_max = config_.integral_authority / std::abs(gains.ki_K);
}

ControlOutput Controller::Tick(const ControlReferences& refs,
                               const JointState& measured, double dt,
                               std::optional<double> torque_reading) {
  ControlOutput out;
  ControlDiagnostics& diag = out.diagnostics;
  diag.targets = refs.targets;
  if (config_.mode == ControlMode::kImpedance) {
    diag.targets.T_des =
        OuterImpedance(refs.theta_r, refs.theta_dot_r, measured.theta,
                       measured.theta_dot, config_.impedance, plant_.joint());
  }

  const ActivationPair warm = warm_start_ ? last_ff_ : ActivationPair{0.5, 0.5};
  const InnerSolution ff =
      InnerSolve(plant_, diag.targets, measured, warm, dt, config_.solver);
  last_ff_ = ff.alpha;
  diag.alpha_ff = ff.alpha;
  diag.iterations = ff.iterations;
  diag.residual = ff.residual;
  diag.feasible = ff.feasible;

  const ActivationPair actual = {ActivationOfDrive(measured.muscle_1.a),
                                 ActivationOfDrive(measured.muscle_2.a)};
  diag.T_est = torque_reading.value_or(plant_.Torque(measured));
  diag.K_est = plant_.Stiffness(measured, actual, dt).total;

  CoContractionBias cb = ToCoContractionBias(ff.alpha);
  if (config_.feedback) {
    const PiOutput fb =
        PiUpdate(pi_, diag.targets.T_des - diag.T_est,
                 diag.targets.K_des - diag.K_est, dt, last_saturation_);
    pi_ = fb.state;
    cb.c += fb.delta_c;
    cb.b += fb.delta_b;
    diag.delta_c = fb.delta_c;
    diag.delta_b = fb.delta_b;
  }

  const LimitedCommand limited = ApplyCommandLimits(
      config_.limits, {cb.c + cb.b, cb.c - cb.b}, last_cmd_, dt);
  last_saturation_ = limited.saturation;
  ActivationPair alpha = limited.alpha;
  if (config_.preload) {
    alpha = plant_.ApplyPreload(measured.theta, alpha, &diag.preload_feasible);
  }
  last_cmd_ = alpha;

  diag.alpha_cmd = alpha;
  out.alpha = alpha;
  out.u1 = config_.activation_map.CommandFor(alpha.alpha1);
  out.u2 = config_.activation_map.CommandFor(alpha.alpha2);
  return out;
}

}  // namespace softjoint
