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

#ifndef SOFTJOINT_CONTROLLER_H_
#define SOFTJOINT_CONTROLLER_H_

// Cascaded torque / stiffness controller for the antagonistic joint:
// optional outer impedance loop, damped Gauss-Newton activation solver
// (feedforward), PI feedback in co-contraction / bias coordinates,
// saturation + slew limiting and tendon preload enforcement.

#include <array>
#include <optional>

#include <Eigen/Dense>

#include "softjoint/core_model.h"
#include "softjoint/joint_plant.h"

namespace softjoint {

struct ImpedanceGains {
  double K_imp = 0.0;  // N m / rad
  double D_imp = 0.0;  // N m s / rad
};

struct ControlTargets {
  double T_des = 0.0;  // N m
  double K_des = 0.0;  // N m / rad, total joint stiffness
};

struct PiGains {
  double kp_T = 0.0;
  double ki_T = 0.0;
  double kp_K = 0.0;
  double ki_K = 0.0;
};

// Direction in which a downstream command channel is pinned: +1 at its
// upper limit, -1 at its lower limit, 0 free.
struct Saturation {
  int c = 0;
  int b = 0;
};

struct PiState {
  PiGains gains;
  double integral_T = 0.0;  // N m s
  double integral_K = 0.0;  // N m s / rad
  double integral_T_max = 1.0;
  double integral_K_max = 10.0;
  double last_e_T = 0.0;
  double last_e_K = 0.0;
  bool primed = false;  // last_e_* hold a previous sample
};

struct PiOutput {
  double delta_c = 0.0;
  double delta_b = 0.0;
  PiState state;
};

struct CommandLimits {
  std::array<double, 2> alpha_min = {0.0, 0.0};
  std::array<double, 2> alpha_max = {1.0, 1.0};
  double slew_max = 20.0;  // 1/s per activation channel

  void Validate() const;
};

// T_des = K_imp (theta_r - theta) + D_imp (theta_dot_r - theta_dot)
//         + tau_g(theta).
double OuterImpedance(double theta_r, double theta_dot_r, double theta,
                      double theta_dot, const ImpedanceGains& gains,
                      const JointParams& params);

// y(alpha) = [T, K_act,step] with the internal deformations of `state`.
Eigen::Vector2d PlantOutputs(const JointPlant& plant, ActivationPair alpha,
                             const JointState& state, double dt);

// d y / d alpha, x held fixed within the tick.
Eigen::Matrix2d OutputJacobian(const JointPlant& plant, ActivationPair alpha,
                               const JointState& state, double dt);

struct InnerSolverOptions {
  double lambda = 1e-4;
  int max_iterations = 8;
  double torque_scale = 1.0;      // N m
  double stiffness_scale = 10.0;  // N m / rad
  double tolerance = 1e-9;        // on the scaled residual norm
  // Best-effort results above this scaled residual are flagged infeasible.
  double feasibility_tolerance = 1e-6;
};

struct InnerSolution {
  ActivationPair alpha;
  int iterations = 0;
  double residual = 0.0;  // scaled residual norm at `alpha`
  bool feasible = true;
};

// Damped Gauss-Newton on e(alpha) = y(alpha) - y_des with
// y_des = [T_des, K_des - K_j - K_g(theta)], iterates projected on [0, 1]^2.
// Returns the best iterate; `feasible` is false when the residual is still
// above tolerance after the iteration budget.
InnerSolution InnerSolve(const JointPlant& plant, const ControlTargets& targets,
                         const JointState& state, ActivationPair warm_start,
                         double dt, const InnerSolverOptions& options = {});

// Trapezoidal PI update. An integrator is frozen when its downstream channel
// is saturated in the direction the error pushes, and clamped to its bound.
PiOutput PiUpdate(const PiState& pi, double e_T, double e_K, double dt,
                  Saturation saturation = {});

// Loop gains from local sensitivities expressed in (c, b) coordinates:
// rows (T, K), columns (c, b). Torque uses d T / d b, stiffness d K / d c.
PiGains DesignPiGains(const Eigen::Matrix2d& sensitivity_cb, double f_T,
                      double f_K, double zeta);

// Sensitivities of y with respect to (c, b) from the alpha Jacobian.
Eigen::Matrix2d CoContractionBiasSensitivity(const Eigen::Matrix2d& jacobian);

struct LimitedCommand {
  ActivationPair alpha;
  Saturation saturation;
};

// Clamps to the activation box keeping co-contraction and projecting the
// bias, then scales the change from `previous` so no channel moves faster
// than slew_max.
LimitedCommand ApplyCommandLimits(const CommandLimits& limits,
                                  ActivationPair proposed,
                                  ActivationPair previous, double dt);

enum class ControlMode { kDirectTargets, kImpedance };

struct ControllerConfig {
  ControlMode mode = ControlMode::kDirectTargets;
  bool feedback = true;
  ImpedanceGains impedance;
  double f_T = 3.0;   // Hz
  double f_K = 1.0;   // Hz
  double zeta = 1.2;
  CommandLimits limits;
  InnerSolverOptions solver;
  // Largest |k_i * integral| in activation units.
  double integral_authority = 1.0;
  bool preload = true;
  // Operating point the PI gains are designed at.
  double design_theta = 0.0;
  CoContractionBias design_point = {0.5, 0.0};
  ActivationMap activation_map = ActivationMap::Hasel(1.0);
};

struct ControlReferences {
  // Impedance mode.
  double theta_r = 0.0;
  double theta_dot_r = 0.0;
  // Direct targets mode uses T_des directly; both modes use K_des.
  ControlTargets targets;
};

struct ControlDiagnostics {
  ControlTargets targets;  // effective (T_des, K_des)
  ActivationPair alpha_ff;
  ActivationPair alpha_cmd;
  int iterations = 0;
  double residual = 0.0;
  bool feasible = true;
  bool preload_feasible = true;
  double T_est = 0.0;  // measured muscle torque
  double K_est = 0.0;  // model-based stiffness at the measured state
  double delta_c = 0.0;
  double delta_b = 0.0;
};

struct ControlOutput {
  double u1 = 0.0;  // actuator commands
  double u2 = 0.0;
  ActivationPair alpha;  // normalized drive targets phi(u)
  ControlDiagnostics diagnostics;
};

// One controller instance per joint; Tick is called once per control period.
class Controller {
 public:
  Controller(const JointPlant& plant, ControllerConfig config);

  // `measured` is the current plant state. The previous command seeds the
  // Gauss-Newton warm start and the slew limiter. `torque_reading` replaces
  // the model torque at the measured state as the feedback signal T_est, e.g.
  // a joint torque sensor that also sees output-side disturbances.
  ControlOutput Tick(const ControlReferences& refs, const JointState& measured,
                     double dt,
                     std::optional<double> torque_reading = std::nullopt);

  void Reset(ActivationPair alpha);
  // Cold-start the next solve from (0.5, 0.5).
  void set_warm_start_enabled(bool enabled) { warm_start_ = enabled; }

  const PiState& pi() const { return pi_; }
  const ControllerConfig& config() const { return config_; }

 private:
  const JointPlant& plant_;
  ControllerConfig config_;
  PiState pi_;
  ActivationPair last_ff_ = {0.5, 0.5};
  ActivationPair last_cmd_ = {0.0, 0.0};
  Saturation last_saturation_;
  bool warm_start_ = true;
};

}  // namespace softjoint

#endif  // SOFTJOINT_CONTROLLER_H_
