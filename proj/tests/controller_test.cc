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
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "softjoint/errors.h"
#include "softjoint/experiments.h"

namespace softjoint {
namespace {

constexpr double kDt = 1e-3;

JointPlant NominalPlant() {
  return JointPlant(JointParams{}, MuscleModel{}.ScaledBy(40.0));
}

// Rest state at a random angle with random internal deformations.
JointState RandomState(const JointPlant& plant, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-0.3, 0.3);
  return plant.RestState(angle(rng), {unit(rng), unit(rng)});
}

TEST(OuterImpedanceTest, Examples) {
  const JointParams p;
  const ImpedanceGains gains = {10.0, 2.0};
  EXPECT_EQ(OuterImpedance(0.0, 0.0, 0.0, 0.0, gains, p), 0.0);
  EXPECT_NEAR(OuterImpedance(0.1, 0.0, 0.0, 0.0, gains, p), 1.0, 1e-15);
  EXPECT_NEAR(OuterImpedance(0.0, 0.0, 0.0, 0.5, gains, p), -1.0, 1e-15);
  EXPECT_NEAR(OuterImpedance(0.2, 0.0, 0.2, 0.0, gains, p),
              GravityTorque(p, 0.2), 1e-15);
}

TEST(PlantOutputsTest, SymmetryAndZeroActivation) {
  const JointPlant plant = NominalPlant();
  const JointState s = plant.RestState(0.0, {0.4, 0.4});
  EXPECT_EQ(PlantOutputs(plant, {0.4, 0.4}, s, kDt)(0), 0.0);
  const Eigen::Vector2d zero = PlantOutputs(plant, {0.0, 0.0}, s, kDt);
  EXPECT_EQ(zero(0), 0.0);
  EXPECT_EQ(zero(1), 0.0);
}

TEST(PlantOutputsTest, MatchesPlantTorqueAndStiffness) {
  const JointPlant plant = NominalPlant();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const JointState s = RandomState(plant, rng);
    const ActivationPair a = {s.muscle_1.a, s.muscle_2.a};
    const Eigen::Vector2d y = PlantOutputs(plant, a, s, kDt);
    EXPECT_NEAR(y(0), plant.Torque(s), 1e-12);
    const StiffnessBreakdown k = plant.Stiffness(s, a, kDt);
    const double passive =
        plant.joint().K_j + GravityStiffness(plant.joint(), s.theta);
    EXPECT_NEAR(y(1), k.total - passive, 1e-12);
  }
}

TEST(OutputJacobianTest, TorqueRowIsLinear) {
  const JointPlant plant = NominalPlant();
  const JointState s = plant.RestState(0.1, {0.3, 0.6});
  const Eigen::Matrix2d jac = OutputJacobian(plant, {0.3, 0.6}, s, kDt);
  const double r = plant.joint().r;
  EXPECT_NEAR(jac(0, 0), r * BaseForce(plant.muscle(1).coeffs, s.muscle_1.x),
              1e-12);
  EXPECT_NEAR(jac(0, 1),
              -r * BaseForce(plant.muscle(2).coeffs, s.muscle_2.x), 1e-12);
}

TEST(OutputJacobianTest, MatchesCentralDifferences) {
  const JointPlant plant = NominalPlant();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  const double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    const JointState s = RandomState(plant, rng);
    const ActivationPair a = {unit(rng), unit(rng)};
    const Eigen::Matrix2d jac = OutputJacobian(plant, a, s, kDt);
    for (int j = 0; j < 2; ++j) {
      ActivationPair up = a;
      ActivationPair down = a;
      (j == 0 ? up.alpha1 : up.alpha2) += h;
      (j == 0 ? down.alpha1 : down.alpha2) -= h;
      const Eigen::Vector2d fd = (PlantOutputs(plant, up, s, kDt) -
                                  PlantOutputs(plant, down, s, kDt)) /
                                 (2.0 * h);
      for (int i = 0; i < 2; ++i) {
        EXPECT_LE(std::abs(jac(i, j) - fd(i)),
                  1e-6 * std::max(1.0, std::abs(fd(i))))
            << "state " << n << " entry (" << i << ", " << j << ")";
      }
    }
  }
}

TEST(OutputJacobianTest, StiffnessSlopeAtZeroActivation) {
  const JointPlant plant = NominalPlant();
  const JointState s = plant.RestState(0.05, {0.0, 0.0});
  const Eigen::Matrix2d jac = OutputJacobian(plant, {0.0, 0.0}, s, kDt);
  const double r_xi = plant.joint().r * plant.joint().xi();
  EXPECT_NEAR(jac(1, 0),
              r_xi * std::abs(BaseForceDerivative(plant.muscle(1).coeffs,
                                                  s.muscle_1.x)),
              1e-12);
  EXPECT_NEAR(jac(1, 1),
              r_xi * std::abs(BaseForceDerivative(plant.muscle(2).coeffs,
                                                  s.muscle_2.x)),
              1e-12);
}

TEST(InnerSolveTest, FixedPointTakesOneIteration) {
  const JointPlant plant = NominalPlant();
  const JointState s = plant.RestState(0.0, {0.6, 0.3});
  const ActivationPair a = {0.6, 0.3};
  const Eigen::Vector2d y = PlantOutputs(plant, a, s, kDt);
  const double passive = plant.joint().K_j + GravityStiffness(plant.joint(), 0);
  const InnerSolution sol =
      InnerSolve(plant, {y(0), y(1) + passive}, s, a, kDt);
  EXPECT_EQ(sol.iterations, 1);
  EXPECT_NEAR(sol.alpha.alpha1, 0.6, 1e-12);
  EXPECT_NEAR(sol.alpha.alpha2, 0.3, 1e-12);
  EXPECT_TRUE(sol.feasible);
}

TEST(InnerSolveTest, ZeroTorqueGivesPureCoContraction) {
  const JointPlant plant = NominalPlant();
  const JointState s = plant.RestState(0.0, {0.5, 0.5});
  const InnerSolution sol = InnerSolve(plant, {0.0, 10.0}, s, {0.5, 0.5}, kDt);
  EXPECT_TRUE(sol.feasible);
  EXPECT_NEAR(sol.alpha.alpha1, sol.alpha.alpha2, 1e-9);
}

TEST(InnerSolveTest, RecoversRandomFeasibleTargets) {
  const JointPlant plant = NominalPlant();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int n = 0; n < 200; ++n) {
    const JointState s = RandomState(plant, rng);
    const ActivationPair a = {unit(rng), unit(rng)};
    const Eigen::Vector2d y = PlantOutputs(plant, a, s, kDt);
    const double passive =
        plant.joint().K_j + GravityStiffness(plant.joint(), s.theta);
    const InnerSolution sol =
        InnerSolve(plant, {y(0), y(1) + passive}, s, {0.5, 0.5}, kDt);
    const Eigen::Vector2d got = PlantOutputs(plant, sol.alpha, s, kDt);
    EXPECT_NEAR(got(0), y(0), 1e-3) << "target " << n;
    EXPECT_NEAR(got(1), y(1), 1e-2) << "target " << n;
  }
}

TEST(InnerSolveTest, NoGridPointBeatsTheSolver) {
  const JointPlant plant = NominalPlant();
  const JointState s = plant.RestState(0.1, {0.5, 0.5});
  const double passive =
      plant.joint().K_j + GravityStiffness(plant.joint(), 0.1);
  const InnerSolverOptions options;
  for (const ControlTargets& t :
       {ControlTargets{0.3, 12.0}, ControlTargets{-0.2, 8.0}}) {
    const InnerSolution sol = InnerSolve(plant, t, s, {0.5, 0.5}, kDt);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i) {
      for (int j = 0; j <= 200; ++j) {
        const Eigen::Vector2d y =
            PlantOutputs(plant, {i / 200.0, j / 200.0}, s, kDt);
        const double e = std::hypot(
            (y(0) - t.T_des) / options.torque_scale,
            (y(1) - (t.K_des - passive)) / options.stiffness_scale);
        best = std::min(best, e);
      }
    }
    EXPECT_LE(sol.residual, best + 1e-12);
  }
}

TEST(InnerSolveTest, UnreachableStiffnessIsFlagged) {
  const JointPlant plant = NominalPlant();
  const JointState s = plant.RestState(0.0, {0.5, 0.5});
  const InnerSolution sol = InnerSolve(plant, {0.0, 1e4}, s, {0.5, 0.5}, kDt);
  EXPECT_FALSE(sol.feasible);
  EXPECT_GE(sol.alpha.alpha1, 0.0);
  EXPECT_LE(sol.alpha.alpha1, 1.0);
  EXPECT_NEAR(sol.alpha.alpha1, 1.0, 1e-9);
  EXPECT_NEAR(sol.alpha.alpha2, 1.0, 1e-9);
}

PiState TestPi() {
  PiState pi;
  pi.gains = {0.5, 4.0, 0.02, 0.3};
  pi.integral_T_max = 100.0;
  pi.integral_K_max = 100.0;
  return pi;
}

TEST(PiUpdateTest, ZeroErrorGivesZeroOutput) {
  const PiOutput out = PiUpdate(TestPi(), 0.0, 0.0, kDt);
  EXPECT_EQ(out.delta_b, 0.0);
  EXPECT_EQ(out.delta_c, 0.0);
  EXPECT_EQ(out.state.integral_T, 0.0);
}

TEST(PiUpdateTest, ConstantErrorGrowsAffinely) {
  PiState pi = TestPi();
  const double e_T = 0.2;
  const double e_K = -1.5;
  for (int n = 1; n <= 1000; ++n) {
    const PiOutput out = PiUpdate(pi, e_T, e_K, kDt);
    pi = out.state;
    ASSERT_NEAR(out.delta_b, 0.5 * e_T + 4.0 * e_T * n * kDt, 1e-12);
    ASSERT_NEAR(out.delta_c, 0.02 * e_K + 0.3 * e_K * n * kDt, 1e-12);
  }
}

TEST(PiUpdateTest, TrapezoidalIntegration) {
  PiState pi = TestPi();
  pi = PiUpdate(pi, 1.0, 0.0, kDt).state;
  pi = PiUpdate(pi, 3.0, 0.0, kDt).state;
  EXPECT_NEAR(pi.integral_T, 1.0 * kDt + 2.0 * kDt, 1e-15);
}

TEST(PiUpdateTest, SaturatedChannelFreezesIntegrator) {
  PiState pi = TestPi();
  pi.integral_T = 0.01;
  pi.integral_K = -0.02;
  const PiOutput pushing = PiUpdate(pi, 0.5, -0.5, kDt, {-1, 1});
  EXPECT_EQ(pushing.state.integral_T, 0.01);
  EXPECT_EQ(pushing.state.integral_K, -0.02);
  // Errors pulling out of saturation still integrate.
  const PiOutput releasing = PiUpdate(pi, -0.5, 0.5, kDt, {-1, 1});
  EXPECT_LT(releasing.state.integral_T, 0.01);
  EXPECT_GT(releasing.state.integral_K, -0.02);
}

TEST(PiUpdateTest, IntegratorsStayBounded) {
  PiState pi = TestPi();
  pi.integral_T_max = 0.05;
  pi.integral_K_max = 0.5;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> error(-10.0, 10.0);
  for (int n = 0; n < 10000; ++n) {
    pi = PiUpdate(pi, error(rng) + 5.0, error(rng) - 5.0, kDt).state;
    ASSERT_LE(std::abs(pi.integral_T), 0.05);
    ASSERT_LE(std::abs(pi.integral_K), 0.5);
  }
  EXPECT_THROW(PiUpdate(pi, 0.0, 0.0, 0.0), ConfigError);
}

TEST(DesignPiGainsTest, InverseScaling) {
  Eigen::Matrix2d s;
  s << 3.0, 0.7, 40.0, 0.1;
  const PiGains g = DesignPiGains(s, 3.0, 1.0, 1.2);
  const PiGains g2 = DesignPiGains(2.0 * s, 3.0, 1.0, 1.2);
  EXPECT_NEAR(g2.kp_T, 0.5 * g.kp_T, 1e-12);
  EXPECT_NEAR(g2.ki_T, 0.5 * g.ki_T, 1e-12);
  EXPECT_NEAR(g2.kp_K, 0.5 * g.kp_K, 1e-12);
  EXPECT_NEAR(g2.ki_K, 0.5 * g.ki_K, 1e-12);
  const double w = 2.0 * std::numbers::pi * 3.0;
  EXPECT_NEAR(g.ki_T, w * w / 0.7, 1e-9);
  EXPECT_NEAR(g.kp_T, 2.0 * 1.2 * w / 0.7, 1e-9);
}

TEST(DesignPiGainsTest, SlowerStiffnessLoop) {
  Eigen::Matrix2d s;
  s << 0.0, 1.0, 1.0, 0.0;
  const PiGains g = DesignPiGains(s, 3.0, 1.0, 1.2);
  EXPECT_LT(g.ki_K, g.ki_T);
  EXPECT_LT(g.kp_K, g.kp_T);
}

TEST(DesignPiGainsTest, UncontrollableChannelThrows) {
  Eigen::Matrix2d s;
  s << 1.0, 0.0, 1.0, 1.0;
  EXPECT_THROW(DesignPiGains(s, 3.0, 1.0, 1.2), ConfigError);
  s << 1.0, 1.0, 0.0, 1.0;
  EXPECT_THROW(DesignPiGains(s, 3.0, 1.0, 1.2), ConfigError);
  s << 1.0, 1.0, 1.0, 1.0;
  EXPECT_THROW(DesignPiGains(s, 0.0, 1.0, 1.2), ConfigError);
}

// Unit step through y = s a, tau_a da/dt = u - a, u = PI(r - y).
double LagLoopOvershoot(double s, double kp, double ki, double tau_a) {
  const double h = 1e-5;
  double a = 0.0;
  double integral = 0.0;
  double peak = 0.0;
  for (int n = 0; n < 300000; ++n) {
    const double e = 1.0 - s * a;
    integral += e * h;
    const double u = kp * e + ki * integral;
    a += h * (u - a) / tau_a;
    peak = std::max(peak, s * a);
  }
  EXPECT_NEAR(s * a, 1.0, 1e-3);
  return peak - 1.0;
}

TEST(DesignPiGainsTest, DesignedLoopsDoNotOvershoot) {
  const JointPlant plant = NominalPlant();
  const JointState at = plant.RestState(0.0, {0.5, 0.5});
  const Eigen::Matrix2d sens = CoContractionBiasSensitivity(
      OutputJacobian(plant, {0.5, 0.5}, at, kDt));
  const PiGains g = DesignPiGains(sens, 3.0, 1.0, 1.2);
  const double tau_a = plant.muscle(1).dynamics.tau_a;
  EXPECT_LE(LagLoopOvershoot(sens(0, 1), g.kp_T, g.ki_T, tau_a), 0.05);
  EXPECT_LE(LagLoopOvershoot(sens(1, 0), g.kp_K, g.ki_K, tau_a), 0.05);
}

TEST(CommandLimitsTest, Examples) {
  CommandLimits limits;
  const LimitedCommand inside =
      ApplyCommandLimits(limits, {0.41, 0.6}, {0.4, 0.6}, kDt);
  EXPECT_EQ(inside.alpha.alpha1, 0.41);
  EXPECT_EQ(inside.alpha.alpha2, 0.6);
  EXPECT_EQ(inside.saturation.c, 0);
  EXPECT_EQ(inside.saturation.b, 0);

  limits.slew_max = 10.0;
  const LimitedCommand slewed =
      ApplyCommandLimits(limits, {1.0, 1.0}, {0.0, 0.0}, kDt);
  EXPECT_NEAR(slewed.alpha.alpha1, 0.01, 1e-15);
  EXPECT_NEAR(slewed.alpha.alpha2, 0.01, 1e-15);

  limits.slew_max = 1e6;
  const LimitedCommand clamped =
      ApplyCommandLimits(limits, {-0.2, -0.2}, {0.1, 0.1}, kDt);
  EXPECT_EQ(clamped.alpha.alpha1, 0.0);
  EXPECT_EQ(clamped.alpha.alpha2, 0.0);
  EXPECT_EQ(clamped.saturation.c, -1);
}

TEST(CommandLimitsTest, ProjectsBiasAndKeepsCoContraction) {
  CommandLimits limits;
  limits.slew_max = 1e6;
  const LimitedCommand out =
      ApplyCommandLimits(limits, {1.1, 0.3}, {0.5, 0.5}, kDt);
  EXPECT_NEAR(out.alpha.alpha1 + out.alpha.alpha2, 1.4, 1e-12);
  EXPECT_NEAR(out.alpha.alpha1, 1.0, 1e-12);
  EXPECT_EQ(out.saturation.b, 1);
  EXPECT_EQ(out.saturation.c, 0);
}

TEST(CommandLimitsTest, RespectsBoxAndSlewForRandomProposals) {
  CommandLimits limits;
  limits.alpha_min = {0.05, 0.1};
  limits.alpha_max = {0.9, 0.95};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> wide(-0.5, 1.5);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  for (int n = 0; n < 2000; ++n) {
    const ActivationPair prev = {unit(rng), unit(rng)};
    const LimitedCommand out =
        ApplyCommandLimits(limits, {wide(rng), wide(rng)}, prev, kDt);
    ASSERT_LE(std::abs(out.alpha.alpha1 - prev.alpha1),
              limits.slew_max * kDt + 1e-15);
    ASSERT_LE(std::abs(out.alpha.alpha2 - prev.alpha2),
              limits.slew_max * kDt + 1e-15);
  }
  CommandLimits bad;
  bad.slew_max = 0.0;
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = CommandLimits{};
  bad.alpha_min = {0.6, 0.0};
  bad.alpha_max = {0.5, 1.0};
  EXPECT_THROW(bad.Validate(), ConfigError);
}

TEST(ControllerTest, AtTargetsCommandsStayPut) {
  const JointPlant plant = NominalPlant();
  const ActivationPair a = {0.55, 0.35};
  const JointState s = plant.RestState(0.0, a);
  ControlReferences refs;
  refs.targets.T_des = plant.Torque(s);
  refs.targets.K_des = plant.Stiffness(s, a, kDt).total;
  Controller controller(plant, ControllerConfig{});
  controller.Reset(a);
  for (int n = 0; n < 5; ++n) {
    const ControlOutput out = controller.Tick(refs, s, kDt);
    EXPECT_NEAR(out.alpha.alpha1, a.alpha1, 1e-9);
    EXPECT_NEAR(out.alpha.alpha2, a.alpha2, 1e-9);
    EXPECT_LE(out.diagnostics.iterations, 2);
    EXPECT_TRUE(out.diagnostics.feasible);
  }
  const ControlOutput out = controller.Tick(refs, s, kDt);
  EXPECT_NEAR(out.u1, std::sqrt(out.alpha.alpha1), 1e-12);
}

TEST(ControllerTest, ImpedanceAtReferenceDemandsNoBias) {
  const JointPlant plant = NominalPlant();
  ControllerConfig config;
  config.mode = ControlMode::kImpedance;
  config.impedance = {10.0, 1.0};
  Controller controller(plant, config);
  controller.Reset({0.5, 0.5});
  JointState s = plant.RestState(0.0, {0.5, 0.5});
  ControlReferences refs;
  refs.targets.T_des = 5.0;  // ignored in impedance mode
  refs.targets.K_des = 12.0;
  ControlOutput out;
  for (int n = 0; n < 200; ++n) {
    out = controller.Tick(refs, s, kDt);
    s = plant.StepLocked(s, out.alpha, kDt);
  }
  EXPECT_EQ(out.diagnostics.targets.T_des, 0.0);
  EXPECT_NEAR(ToCoContractionBias(out.alpha).b, 0.0, 1e-9);
}

TEST(ControllerTest, WarmStartConvergesQuickly) {
  const JointPlant plant = NominalPlant();
  Controller controller(plant, ControllerConfig{});
  controller.Reset({0.5, 0.5});
  JointState s = plant.RestState(0.0, {0.5, 0.5});
  ControlReferences refs;
  int total = 0;
  for (int n = 0; n < 2000; ++n) {
    const double t = n * kDt;
    refs.targets.T_des = 0.3 * std::sin(std::numbers::pi * t);
    refs.targets.K_des = 10.0 + 3.0 * std::sin(0.5 * std::numbers::pi * t);
    const ControlOutput out = controller.Tick(refs, s, kDt);
    total += out.diagnostics.iterations;
    s = plant.StepLocked(s, out.alpha, kDt);
  }
  EXPECT_LE(total / 2000.0, 3.0);
}

// Steady-state deviation of the held channel in a window before the
// stepped channel returns, on the nominal locked joint.
TEST(ControllerTest, OrthogonalStepsStayDecoupled) {
  const PlantSection plant;
  const ControllerSection controller;
  const CompareSection compare;
  const CompareRun run =
      RunCompareTrial(plant, controller, compare, 0.0, /*feedback=*/true);
  double worst_K = 0.0;
  double worst_T = 0.0;
  for (const std::vector<double>& row : run.log) {
    const double t = row[0];
    if (t >= compare.T_down - 0.5 && t < compare.T_down) {
      worst_K = std::max(worst_K, std::abs(row[4] - compare.K_base));
    }
    if (t >= compare.K_down - 0.5 && t < compare.K_down) {
      worst_T = std::max(worst_T, std::abs(row[3]));
    }
  }
  // Channels compared on the solver's reference scales (1 N m, 10 N m/rad).
  EXPECT_LT(worst_K / 10.0, 0.02 * compare.T_step / 1.0);
  EXPECT_LT(worst_T / 1.0, 0.02 * compare.K_step / 10.0);
}

}  // namespace
}  // namespace softjoint
