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


#include "softjoint/identification.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "softjoint/errors.h"

namespace softjoint {
namespace {

const ActivationMap kMap = ActivationMap::Hasel(1.0);

double RelErr(double got, double want) {
  return std::abs(got - want) / std::abs(want);
}

std::vector<Trajectory> SlowData(const MuscleModel& model, double noise,
                                 std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (double level : {0.75, 0.85, 0.95, 1.0}) {
    const ExcitationProfile profile =
        RampProfile(kMap.CommandFor(level), -0.02, 0.10, 0.008);
    out.push_back(SynthesizeTrajectory(model, kMap, profile, noise, seed++));
  }
  return out;
}

std::vector<Trajectory> TransientData(const MuscleModel& model, int trials,
                                      double noise, std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (int i = 0; i < trials; ++i) {
    const ExcitationProfile profile =
        TransientProfile(10.0, 0.0, 0.02, 1.0, seed + 100 + i);
    out.push_back(SynthesizeTrajectory(model, kMap, profile, noise, seed + i));
  }
  return out;
}

std::vector<double> Forces(const std::vector<Trajectory>& data) {
  std::vector<double> f;
  for (const Trajectory& t : data) {
    for (const TrajectorySample& s : t.samples) f.push_back(s.F);
  }
  return f;
}

TEST(TrajectoryCsvTest, RoundTrip) {
  const Trajectory t =
      TransientData(MuscleModel{}, 1, 0.3, 7).front();
  std::stringstream ss;
  WriteTrajectory(ss, t);
  const Trajectory back = ReadTrajectory(ss);
  ASSERT_EQ(back.samples.size(), t.samples.size());
  EXPECT_NEAR(back.rate, 50.0, 1e-9);
  for (size_t i = 0; i < t.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].t, t.samples[i].t);
    EXPECT_EQ(back.samples[i].u, t.samples[i].u);
    EXPECT_EQ(back.samples[i].F, t.samples[i].F);
    EXPECT_EQ(back.samples[i].eps, t.samples[i].eps);
    EXPECT_EQ(back.samples[i].eps_dot, t.samples[i].eps_dot);
  }
}

TEST(TrajectoryCsvTest, NanNamesTheLine) {
  std::istringstream in(
      "t,u,F,eps,eps_dot\n0,0.5,1,0,0\n0.02,0.5,nan,0,0\n");
  try {
    ReadTrajectory(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(TrajectoryCsvTest, MalformedRowsAreParseErrors) {
  std::istringstream short_row("t,u,F,eps,eps_dot\n0,0.5,1,0\n");
  EXPECT_THROW(ReadTrajectory(short_row), ParseError);
  std::istringstream bad_header("t,u,F\n0,0.5,1\n");
  EXPECT_THROW(ReadTrajectory(bad_header), ParseError);
  std::istringstream text("t,u,F,eps,eps_dot\n0,abc,1,0,0\n");
  EXPECT_THROW(ReadTrajectory(text), ParseError);
}

TEST(TrajectoryCsvTest, NonUniformTimesAreSchemaErrors) {
  std::istringstream in(
      "t,u,F,eps,eps_dot\n0,0.5,1,0,0\n0.02,0.5,1,0,0\n0.05,0.5,1,0,0\n");
  EXPECT_THROW(ReadTrajectory(in), SchemaError);
  std::istringstream backwards(
      "t,u,F,eps,eps_dot\n0,0.5,1,0,0\n-0.02,0.5,1,0,0\n");
  EXPECT_THROW(ReadTrajectory(backwards), SchemaError);
}

TEST(SynthesizeTest, SameSeedSameTrajectory) {
  const ExcitationProfile p = TransientProfile(5.0, 0.0, 0.02, 1.0, 3);
  const Trajectory a = SynthesizeTrajectory(MuscleModel{}, kMap, p, 0.3, 9);
  const Trajectory b = SynthesizeTrajectory(MuscleModel{}, kMap, p, 0.3, 9);
  const Trajectory c = SynthesizeTrajectory(MuscleModel{}, kMap, p, 0.3, 10);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  bool differs = false;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].F, b.samples[i].F);
    differs |= a.samples[i].F != c.samples[i].F;
  }
  EXPECT_TRUE(differs);
}

TEST(SynthesizeTest, MismatchedProfileThrows) {
  ExcitationProfile p = TransientProfile(1.0, 0.0, 0.02, 1.0, 3);
  p.eps.pop_back();
  EXPECT_THROW(SynthesizeTrajectory(MuscleModel{}, kMap, p, 0.0, 1),
               ConfigError);
}

TEST(EvaluateFitTest, GeneratorReproducesItsNoiselessOutput) {
  const MuscleModel model;
  const std::vector<Trajectory> data = TransientData(model, 2, 0.0, 5);
  const FitReport r = EvaluateFit(model, kMap, data, {-0.02, 0.12}, 40);
  EXPECT_LT(r.rmse, 1e-9);
  EXPECT_NEAR(r.r_squared, 1.0, 1e-12);
  EXPECT_TRUE(r.constraints.AllPassed());
}

TEST(EvaluateFitTest, NoiseFloorStatistics) {
  const MuscleModel model;
  const std::vector<Trajectory> clean = TransientData(model, 4, 0.0, 5);
  const std::vector<Trajectory> noisy = TransientData(model, 4, 0.3, 5);
  const FitReport r = EvaluateFit(model, kMap, noisy, {-0.02, 0.12}, 40);
  EXPECT_NEAR(r.rmse, 0.3, 0.03);

  // Expected r^2 = 1 - sigma^2 / var(measured).
  const std::vector<double> f = Forces(noisy);
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / f.size();
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  var /= f.size();
  EXPECT_NEAR(r.r_squared, 1.0 - 0.09 / var, 0.05);
  EXPECT_GT(Forces(clean).size(), 0u);
}

TEST(ScorePredictionsTest, ConstantMeanPredictorHasZeroRSquared) {
  const std::vector<double> measured = {1.0, 4.0, 2.0, 7.0, 6.0};
  const std::vector<double> mean(5, 4.0);
  const FitReport r = ScorePredictions(mean, measured);
  EXPECT_NEAR(r.r_squared, 0.0, 1e-15);
  EXPECT_NEAR(r.rmse, std::sqrt((9.0 + 0.0 + 4.0 + 9.0 + 4.0) / 5.0), 1e-12);
  EXPECT_EQ(r.residuals.front(), 3.0);
}

QuasiStaticOptions FastQuasiStatic() {
  QuasiStaticOptions o;
  o.starts = 4;
  o.interval = {-0.02, 0.12};
  return o;
}

TEST(FitQuasiStaticTest, NoiselessRoundTrip) {
  const MuscleModel model;
  QuasiStaticOptions o = FastQuasiStatic();
  o.series = model.dynamics;
  const QuasiStaticFit fit = FitQuasiStatic(SlowData(model, 0.0, 1), o);
  EXPECT_LT(RelErr(fit.coeffs.c0, 6.804), 0.01);
  EXPECT_LT(RelErr(fit.coeffs.c1, -171.076), 0.01);
  EXPECT_LT(RelErr(fit.coeffs.c2, 1087.818), 0.01);
  EXPECT_LT(RelErr(fit.coeffs.d1, 5.674), 0.01);
  EXPECT_TRUE(fit.constraints.AllPassed());
  EXPECT_TRUE(
      ValidateShapeConstraints(fit.coeffs, fit.interval).AllPassed());
}

TEST(FitQuasiStaticTest, NoiselessWithFittedSeriesStiffness) {
  const MuscleModel model;
  const QuasiStaticFit fit =
      FitQuasiStatic(SlowData(model, 0.0, 1), FastQuasiStatic());
  ASSERT_TRUE(fit.series_stiffness.has_value());
  EXPECT_LT(RelErr(fit.coeffs.c0, 6.804), 0.01);
  EXPECT_LT(RelErr(fit.coeffs.d1, 5.674), 0.01);
  EXPECT_LT(RelErr(*fit.series_stiffness, 2370.9), 0.05);
}

TEST(FitQuasiStaticTest, NoisyRoundTrip) {
  const MuscleModel model;
  QuasiStaticOptions o = FastQuasiStatic();
  o.series = model.dynamics;
  const QuasiStaticFit fit = FitQuasiStatic(SlowData(model, 0.3, 11), o);
  EXPECT_LT(RelErr(fit.coeffs.c0, 6.804), 0.1);
  EXPECT_LT(RelErr(fit.coeffs.c1, -171.076), 0.1);
  EXPECT_LT(RelErr(fit.coeffs.c2, 1087.818), 0.1);
  EXPECT_LT(RelErr(fit.coeffs.d1, 5.674), 0.1);
  EXPECT_TRUE(fit.constraints.AllPassed());
}

TEST(FitQuasiStaticTest, PolynomialGeneratorGivesSmallD1) {
  MuscleModel pam;
  pam.coeffs = {6.8, -150.0, 900.0, 0.0};
  QuasiStaticOptions o = FastQuasiStatic();
  o.series = pam.dynamics;
  const QuasiStaticFit fit = FitQuasiStatic(SlowData(pam, 0.0, 1), o);
  EXPECT_LE(std::abs(fit.coeffs.d1), 0.1);
}

TEST(FitQuasiStaticTest, TraceIsMonotoneAndFitIsDeterministic) {
  const MuscleModel model;
  const std::vector<Trajectory> data = SlowData(model, 0.3, 4);
  QuasiStaticOptions o = FastQuasiStatic();
  o.series = model.dynamics;
  const QuasiStaticFit a = FitQuasiStatic(data, o);
  const QuasiStaticFit b = FitQuasiStatic(data, o);
  ASSERT_FALSE(a.trace.empty());
  for (size_t i = 1; i < a.trace.size(); ++i) {
    EXPECT_LE(a.trace[i], a.trace[i - 1]);
  }
  EXPECT_EQ(a.coeffs.c0, b.coeffs.c0);
  EXPECT_EQ(a.coeffs.d1, b.coeffs.d1);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.starts.size(), 4u);
}

TEST(FitQuasiStaticTest, TooFewSamplesThrows) {
  Trajectory t;
  for (int i = 0; i < 20; ++i) {
    t.samples.push_back({i * 0.02, 1.0, 5.0, 0.001 * i, 0.0});
  }
  EXPECT_THROW(FitQuasiStatic({t}, FastQuasiStatic()), InsufficientDataError);
}

DynamicsOptions FastDynamics() {
  DynamicsOptions o;
  o.starts = 4;
  return o;
}

TEST(FitDynamicsTest, NoiselessRoundTrip) {
  const MuscleModel model;
  const DynamicsFit fit = FitDynamics(TransientData(model, 3, 0.0, 21),
                                      model.coeffs, FastDynamics());
  EXPECT_LT(RelErr(fit.params.k_s, 2370.9), 0.05);
  EXPECT_LT(RelErr(fit.params.eta, 64.98), 0.05);
  EXPECT_LT(RelErr(fit.params.tau_a, 0.040), 0.05);
  EXPECT_FALSE(fit.ill_conditioned);
  for (size_t i = 1; i < fit.trace.size(); ++i) {
    EXPECT_LE(fit.trace[i], fit.trace[i - 1]);
  }
}

TEST(FitDynamicsTest, HalvedTimeConstantIsTracked) {
  MuscleModel fast;
  fast.dynamics.tau_a = 0.020;
  const DynamicsFit fit = FitDynamics(TransientData(fast, 3, 0.0, 21),
                                      fast.coeffs, FastDynamics());
  EXPECT_NEAR(fit.params.tau_a / 0.040, 0.5, 0.05);
}

TEST(FitDynamicsTest, QuasiStaticDataIsIllConditioned) {
  const MuscleModel model;
  DynamicsOptions o = FastDynamics();
  o.max_iterations = 200;
  const DynamicsFit fit =
      FitDynamics(SlowData(model, 0.0, 1), model.coeffs, o);
  EXPECT_TRUE(fit.ill_conditioned);
  EXPECT_FALSE(fit.warning.empty());
}

TEST(FitDynamicsTest, TooFewSamplesThrows) {
  Trajectory t;
  for (int i = 0; i < 10; ++i) {
    t.samples.push_back({i * 0.02, 1.0, 5.0, 0.0, 0.0});
  }
  EXPECT_THROW(FitDynamics({t}, MuscleModel{}.coeffs, FastDynamics()),
               InsufficientDataError);
}

}  // namespace
}  // namespace softjoint
