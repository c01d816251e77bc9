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

#include "softjoint/core_model.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "softjoint/errors.h"

namespace softjoint {
namespace {

const PadeCoefficients kHasel = PadeCoefficients::Hasel();

TEST(BaseForceTest, ValueAtZeroIsC0) {
  EXPECT_DOUBLE_EQ(BaseForce(kHasel, 0.0), 6.804);
}

TEST(BaseForceTest, MatchesHandEvaluation) {
  // (6.804 - 171.076 * 0.05 + 1087.818 * 0.0025) / (1 + 5.674 * 0.05).
  const double numerator = 6.804 - 8.5538 + 2.719545;
  const double denominator = 1.2837;
  EXPECT_NEAR(BaseForce(kHasel, 0.05), numerator / denominator, 1e-12);
  EXPECT_NEAR(BaseForce(kHasel, 0.05), 0.7554296175118798, 1e-12);
}

TEST(BaseForceTest, ConstantCurve) {
  const PadeCoefficients one{1.0, 0.0, 0.0, 0.0};
  for (double z : {-0.5, 0.0, 0.03, 7.0}) EXPECT_EQ(BaseForce(one, z), 1.0);
}

TEST(BaseForceTest, PoleThrowsDomainError) {
  const double pole = -1.0 / kHasel.d1;
  EXPECT_THROW(BaseForce(kHasel, pole), DomainError);
  EXPECT_THROW(BaseForce(kHasel, pole - 0.01), DomainError);
  EXPECT_THROW(BaseForceDerivative(kHasel, pole - 0.01), DomainError);
  try {
    BaseForce(kHasel, -0.2);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_DOUBLE_EQ(e.value(), -0.2);
  }
}

TEST(BaseForceTest, SmallStrainSlope) {
  EXPECT_NEAR(kHasel.SmallStrainSlope(), -209.681896, 1e-9);
  EXPECT_NEAR(BaseForceDerivative(kHasel, 0.0), -209.681896, 1e-9);
}

TEST(BaseForceTest, DerivativeMatchesCentralDifferences) {
  const double h = 1e-6;
  for (int i = 0; i <= 200; ++i) {
    const double z = -0.02 + 0.14 * i / 200.0;
    const double fd =
        (BaseForce(kHasel, z + h) - BaseForce(kHasel, z - h)) / (2.0 * h);
    const double exact = BaseForceDerivative(kHasel, z);
    EXPECT_NEAR(exact, fd, 1e-6 * std::max(1.0, std::abs(exact))) << z;
  }
}

TEST(ActivationTest, MapsPerActuator) {
  EXPECT_DOUBLE_EQ(ActivationFromCommand(ActivationMap::Pam(600.0), 300.0).alpha,
                   0.5);
  EXPECT_DOUBLE_EQ(ActivationFromCommand(ActivationMap::Hasel(8.0), 4.0).alpha,
                   0.25);
  EXPECT_DOUBLE_EQ(ActivationFromCommand(ActivationMap::Dea(2.0), 1.0).alpha,
                   0.25);
}

TEST(ActivationTest, ClampsAndFlagsOutOfRangeCommands) {
  const ActivationMap map = ActivationMap::Hasel(1.0);
  const Activation low = ActivationFromCommand(map, -0.2);
  EXPECT_EQ(low.alpha, 0.0);
  EXPECT_TRUE(low.saturated);
  const Activation high = ActivationFromCommand(map, 1.5);
  EXPECT_EQ(high.alpha, 1.0);
  EXPECT_TRUE(high.saturated);
  EXPECT_FALSE(ActivationFromCommand(map, 0.7).saturated);
}

TEST(ActivationTest, BoundedForAllVariants) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (const ActivationMap& map :
       {ActivationMap::Pam(2.0), ActivationMap::Hasel(2.0),
        ActivationMap::Dea(2.0)}) {
    for (int i = 0; i < 1000; ++i) {
      const double alpha = ActivationFromCommand(map, u(rng)).alpha;
      EXPECT_GE(alpha, 0.0);
      EXPECT_LE(alpha, 1.0);
    }
  }
}

TEST(ActivationTest, CommandForInvertsTheMap) {
  for (const ActivationMap& map :
       {ActivationMap::Pam(3.0), ActivationMap::Hasel(5.0),
        ActivationMap::Dea(0.5)}) {
    for (double alpha : {0.0, 0.1, 0.5, 0.9, 1.0}) {
      EXPECT_NEAR(ActivationFromCommand(map, map.CommandFor(alpha)).alpha,
                  alpha, 1e-14);
    }
  }
}

TEST(MuscleStepTest, RestStateIsUnchanged) {
  const MuscleDynamicParams p = MuscleDynamicParams::Hasel();
  const MuscleState rest{0.0, 0.03};
  for (double dt : {1e-4, 1e-3, 0.1}) {
    const MuscleStepResult r = MuscleStep(rest, p, kHasel, 0.0, 0.03, 0.0, dt);
    EXPECT_EQ(r.state.a, 0.0);
    EXPECT_NEAR(r.state.x, 0.03, 1e-15);
    EXPECT_NEAR(r.force, 0.0, 1e-12);
  }
}

TEST(MuscleStepTest, DriveReaches63PercentAtTimeConstant) {
  const MuscleDynamicParams p = MuscleDynamicParams::Hasel();
  const double dt = 1e-4;
  MuscleState s{0.0, 0.0};
  double crossing = -1.0;
  for (int k = 1; k <= 2000 && crossing < 0.0; ++k) {
    s = MuscleStep(s, p, kHasel, ActivationMap::Hasel(1.0), 1.0, 0.0, 0.0, dt)
            .state;
    if (s.a >= 1.0 - std::exp(-1.0)) crossing = k * dt;
  }
  EXPECT_NEAR(crossing, p.tau_a, dt);
  // Closed-form lag after an arbitrary number of steps.
  MuscleState t{0.2, 0.0};
  for (int k = 0; k < 37; ++k) t = MuscleStep(t, p, kHasel, 0.9, 0.0, 0.0, dt).state;
  EXPECT_NEAR(t.a, 0.9 + (0.2 - 0.9) * std::exp(-37 * dt / p.tau_a), 1e-12);
}

TEST(MuscleStepTest, SeriesForceIdentityHoldsEveryStep) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> drive(0.0, 1.0);
  std::uniform_real_distribution<double> rate(-0.2, 0.2);
  const MuscleDynamicParams p = MuscleDynamicParams::Hasel();
  MuscleState s{0.3, 0.0};
  double eps = 0.0;
  const double dt = 5e-4;
  for (int k = 0; k < 4000; ++k) {
    const double d = k % 200 == 0 ? drive(rng) : s.a;
    double eps_dot = rate(rng);
    if (eps + eps_dot * dt > 0.09 || eps + eps_dot * dt < -0.01) {
      eps_dot = -eps_dot;
    }
    const MuscleStepResult r = MuscleStep(s, p, kHasel, d, eps, eps_dot, dt);
    const double expected =
        ActivationOfDrive(r.state.a) * BaseForce(kHasel, r.state.x);
    ASSERT_LE(std::abs(r.force - expected),
              1e-9 * std::max(1.0, std::abs(r.force)))
        << "step " << k;
    s = r.state;
    eps += eps_dot * dt;
  }
}

TEST(MuscleStepTest, QuasiStaticLimitRecoversStaticForceLaw) {
  const MuscleDynamicParams p{1e9, 1e-9, 1e-6};
  const double eps = 0.04;
  const double alpha = 0.64;
  MuscleState s{0.0, eps};
  MuscleStepResult r;
  for (int k = 0; k < 50; ++k) {
    r = MuscleStep(s, p, kHasel, ActivationMap::Hasel(1.0), 0.8, eps, 0.0,
                   5e-4);
    s = r.state;
  }
  const double expected = alpha * BaseForce(kHasel, eps);
  EXPECT_NEAR(r.force, expected, 1e-3 * expected);
}

TEST(MuscleStepTest, QuasiStaticErrorShrinksMonotonically) {
  const double eps = 0.03;
  double previous = INFINITY;
  for (double lambda : {1.0, 0.1, 0.01, 0.001}) {
    const MuscleDynamicParams p{2370.9 / lambda, 64.98 * lambda,
                                0.04 * lambda};
    MuscleState s{0.0, eps};
    MuscleStepResult r;
    for (int k = 0; k < 4000; ++k) {
      r = MuscleStep(s, p, kHasel, 1.0, eps, 0.0, 1e-3);
      s = r.state;
    }
    const double error = std::abs(r.force - BaseForce(kHasel, eps));
    EXPECT_LT(error, previous) << lambda;
    previous = error;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(MuscleStepTest, ZeroDampingUsesAlgebraicBranch) {
  const MuscleDynamicParams p{2370.9, 0.0, 0.04};
  const MuscleStepResult r =
      MuscleStep({1.0, 0.0}, p, kHasel, 1.0, 0.05, 0.0, 1e-3);
  const double residual = p.k_s * (0.05 - r.state.x) -
                          BaseForce(kHasel, r.state.x);
  EXPECT_LT(std::abs(residual), p.k_s * 1e-9);
  EXPECT_NEAR(r.force, BaseForce(kHasel, r.state.x), 1e-9);
}

TEST(MuscleStepTest, NoSeriesBranchIsConfigError) {
  EXPECT_THROW(MuscleStep({}, {0.0, 0.0, 0.04}, kHasel, 0.5, 0.0, 0.0, 1e-3),
               ConfigError);
  EXPECT_THROW(MuscleStep({}, {1.0, 1.0, 0.0}, kHasel, 0.5, 0.0, 0.0, 1e-3),
               ConfigError);
}

TEST(MuscleStepTest, StiffSeriesBranchSettlesOnEquilibrium) {
  // Relaxation time eta / k_s = 5 us: too fast for explicit sub-steps, too
  // slow for the algebraic branch.
  const MuscleDynamicParams p{2e5, 1.0, 0.04};
  MuscleState s{1.0, 0.0};
  for (int k = 0; k < 20; ++k) {
    const MuscleStepResult r = MuscleStep(s, p, kHasel, 1.0, 0.05, 0.0, 1e-3);
    ASSERT_TRUE(std::isfinite(r.force));
    s = r.state;
  }
  EXPECT_NEAR(s.x, SolveQuasiStaticDeformation(p, kHasel, 1.0, 0.05), 1e-9);
}

TEST(MuscleStepTest, Deterministic) {
  auto run = [] {
    std::vector<double> out;
    MuscleState s{0.0, 0.0};
    for (int k = 0; k < 500; ++k) {
      const MuscleStepResult r =
          MuscleStep(s, MuscleDynamicParams::Hasel(), kHasel,
                     0.5 + 0.5 * std::sin(0.01 * k), 0.02 * std::sin(0.02 * k),
                     0.02 * 0.02 / 1e-3 * std::cos(0.02 * k), 1e-3);
      s = r.state;
      out.push_back(r.force);
      out.push_back(s.x);
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(ShapeConstraintsTest, IdentifiedCoefficientsPass) {
  const ConstraintReport r = ValidateShapeConstraints(kHasel, {0.0, 0.10});
  EXPECT_TRUE(r.AllPassed());
  // Minimum of the curve from the derivative's numerator root.
  const double c2 = kHasel.c2, d1 = kHasel.d1, k = kHasel.SmallStrainSlope();
  const double z_min = (-2.0 * c2 + std::sqrt(4.0 * c2 * c2 - 4.0 * d1 * c2 * k)) /
                       (2.0 * d1 * c2);
  EXPECT_NEAR(r.max_contraction, z_min, 1e-4);
}

TEST(ShapeConstraintsTest, NegativeCurveFailsPositivity) {
  const ConstraintReport r =
      ValidateShapeConstraints({-1.0, 0.0, 0.0, 0.0}, {0.0, 0.1});
  EXPECT_FALSE(r.positivity.passed);
  EXPECT_FALSE(r.AllPassed());
}

TEST(ShapeConstraintsTest, PoleInsideIntervalFailsDenominator) {
  const ConstraintReport r =
      ValidateShapeConstraints({1.0, 0.0, 0.0, -10.0}, {0.0, 0.12});
  EXPECT_FALSE(r.denominator.passed);
  EXPECT_NEAR(r.denominator.worst_z, 0.12, 1e-12);
}

TEST(ShapeConstraintsTest, RisingCurveFailsMonotonicity) {
  const ConstraintReport r =
      ValidateShapeConstraints({1.0, 10.0, 0.0, 0.0}, {0.0, 0.1});
  EXPECT_FALSE(r.monotonicity.passed);
}

TEST(ShapeConstraintsTest, EmptyIntervalIsConfigError) {
  EXPECT_THROW(ValidateShapeConstraints(kHasel, {0.1, 0.1}), ConfigError);
}

TEST(MuscleModelTest, ScalingMultipliesForcesAndSeriesBranch) {
  const MuscleModel one;
  const MuscleModel many = one.ScaledBy(40.0);
  for (double z : {-0.02, 0.0, 0.05}) {
    EXPECT_NEAR(BaseForce(many.coeffs, z), 40.0 * BaseForce(one.coeffs, z),
                1e-9);
  }
  EXPECT_DOUBLE_EQ(many.coeffs.d1, one.coeffs.d1);
  EXPECT_DOUBLE_EQ(many.dynamics.k_s, 40.0 * one.dynamics.k_s);
  EXPECT_DOUBLE_EQ(many.dynamics.eta, 40.0 * one.dynamics.eta);
  EXPECT_DOUBLE_EQ(many.dynamics.tau_a, one.dynamics.tau_a);
  EXPECT_THROW(one.ScaledBy(0.0), ConfigError);
}

}  // namespace
}  // namespace softjoint
