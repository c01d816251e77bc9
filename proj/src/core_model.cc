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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "softjoint/errors.h"

namespace softjoint {
namespace {

double Denominator(const PadeCoefficients& c, double z) {
  const double den = 1.0 + c.d1 * z;
  if (!(den > 0.0)) {
    std::ostringstream msg;
    msg << "Pade denominator 1 + d1*z = " << den << " is not positive at z = "
        << z;
    throw DomainError(msg.str(), z);
  }
  return den;
}

// Series relaxation times shorter than this fraction of a step are treated
// as instantaneous.
constexpr double kQuasiStaticRatio = 1e-3;
constexpr double kMaxRk4Rate = 0.5;  // dt * |lambda| per RK4 sub-step
constexpr double kDeformationTol = 1e-10;
constexpr int kMaxRk4Substeps = 16;
constexpr int kMaxNewtonIterations = 30;

double DeformationRate(const MuscleDynamicParams& p, const PadeCoefficients& c,
                       double alpha, double x, double eps, double eps_dot) {
  return eps_dot + (p.k_s * (eps - x) - alpha * BaseForce(c, x)) / p.eta;
}

}  // namespace

bool IsQuasiStaticSeries(const MuscleDynamicParams& p, double dt) {
  if (p.eta == 0.0) return true;
  return p.k_s > 0.0 && p.eta / p.k_s < kQuasiStaticRatio * dt;
}

void MuscleDynamicParams::Validate() const {
  if (!(k_s >= 0.0) || !(eta >= 0.0)) {
    throw ConfigError("muscle series stiffness and damping must be >= 0");
  }
  if (!(tau_a > 0.0)) throw ConfigError("muscle tau_a must be > 0");
  if (k_s == 0.0 && eta == 0.0) {
    throw ConfigError(
        "muscle with k_s = 0 and eta = 0 has no series branch to carry load");
  }
}

double ActivationMap::CommandFor(double alpha) const {
  alpha = ActivationOfDrive(alpha);
  if (type == ActuatorType::kPam) return alpha * max_command;
  return std::sqrt(alpha) * max_command;
}

MuscleModel MuscleModel::ScaledBy(double units) const {
  if (!(units > 0.0)) throw ConfigError("muscle unit count must be > 0");
  MuscleModel out = *this;
  out.coeffs.c0 *= units;
  out.coeffs.c1 *= units;
  out.coeffs.c2 *= units;
  out.dynamics.k_s *= units;
  out.dynamics.eta *= units;
  return out;
}

double BaseForce(const PadeCoefficients& c, double z) {
  const double den = Denominator(c, z);
  return (c.c0 + c.c1 * z + c.c2 * z * z) / den;
}

double BaseForceDerivative(const PadeCoefficients& c, double z) {
  const double den = Denominator(c, z);
  const double num =
      (c.c1 - c.d1 * c.c0) + 2.0 * c.c2 * z + c.d1 * c.c2 * z * z;
  return num / (den * den);
}

Activation ActivationFromCommand(const ActivationMap& map, double u) {
  if (!(map.max_command > 0.0)) {
    throw ConfigError("activation map max_command must be > 0");
  }
  Activation out;
  double v = u / map.max_command;
  if (v < 0.0 || v > 1.0 || std::isnan(v)) {
    out.saturated = true;
    v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  }
  out.alpha = map.type == ActuatorType::kPam ? v : v * v;
  out.alpha = ActivationOfDrive(out.alpha);
  return out;
}

double SolveQuasiStaticDeformation(const MuscleDynamicParams& p,
                                   const PadeCoefficients& c, double alpha,
                                   double eps) {
  if (p.k_s == 0.0) {
    throw ConfigError("algebraic series branch needs k_s > 0");
  }
  // residual(x) = k_s (eps - x) - alpha F_base(x); decreasing near the root.
  auto residual = [&](double x) {
    return p.k_s * (eps - x) - alpha * BaseForce(c, x);
  };
  const double r0 = residual(eps);
  if (r0 == 0.0) return eps;
  // Expand a bracket away from eps in the direction of the sign change.
  const double dir = r0 < 0.0 ? -1.0 : 1.0;
  double step = std::max(std::abs(r0) / p.k_s, kDeformationTol);
  // Candidates never cross the pole of the denominator.
  const bool pole_ahead = c.d1 != 0.0 && dir * (-1.0 / c.d1 - eps) > 0.0;
  const double pole = pole_ahead ? -1.0 / c.d1 : 0.0;
  auto clip = [&](double from, double to) {
    if (pole_ahead && dir * (to - pole) >= 0.0) return 0.5 * (from + pole);
    return to;
  };
  double a = eps;
  double b = clip(a, eps + dir * step);
  for (int i = 0; i < 200 && (residual(b) < 0.0) == (r0 < 0.0); ++i) {
    a = b;
    step *= 2.0;
    b = clip(a, eps + dir * step);
  }
  if ((residual(b) < 0.0) == (r0 < 0.0)) {
    throw DomainError("no quasi-static deformation bracket found", eps);
  }
  double lo = std::min(a, b), hi = std::max(a, b);
  const bool lo_negative = residual(lo) < 0.0;
  while (hi - lo > kDeformationTol) {
    const double mid = 0.5 * (lo + hi);
    if ((residual(mid) < 0.0) == lo_negative) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

MuscleStepResult MuscleStep(const MuscleState& state,
                            const MuscleDynamicParams& params,
                            const PadeCoefficients& coeffs, double drive,
                            double eps, double eps_dot, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  params.Validate();

  // Exact drive lag with the target held over the step.
  auto drive_at = [&](double t) {
    return drive + (state.a - drive) * std::exp(-t / params.tau_a);
  };

  MuscleStepResult out;
  out.state.a = drive_at(dt);
  const double alpha_end = ActivationOfDrive(out.state.a);
  const double eps_end = eps + eps_dot * dt;

  if (IsQuasiStaticSeries(params, dt)) {
    out.state.x =
        SolveQuasiStaticDeformation(params, coeffs, alpha_end, eps_end);
    // Equal to k_s (eps - x) at the root, without the root tolerance
    // amplified by k_s.
    out.force = alpha_end * BaseForce(coeffs, out.state.x);
    return out;
  }

  const double stiff =
      params.k_s +
      std::abs(ActivationOfDrive(state.a) * BaseForceDerivative(coeffs, state.x));
  const int substeps = std::max(
      1, static_cast<int>(std::ceil(dt * stiff / params.eta / kMaxRk4Rate)));
  const double h = dt / substeps;

  auto rate = [&](double t, double x) {
    return DeformationRate(params, coeffs, ActivationOfDrive(drive_at(t)), x,
                           eps + eps_dot * t, eps_dot);
  };

  double x = state.x;
  if (substeps <= kMaxRk4Substeps) {
    for (int i = 0; i < substeps; ++i) {
      const double t = i * h;
      const double k1 = rate(t, x);
      const double k2 = rate(t + 0.5 * h, x + 0.5 * h * k1);
      const double k3 = rate(t + 0.5 * h, x + 0.5 * h * k2);
      const double k4 = rate(t + h, x + h * k3);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  } else {
    // Stiff series branch: backward Euler, Newton on each sub-step.
    const double hb = dt / kMaxRk4Substeps;
    for (int i = 0; i < kMaxRk4Substeps; ++i) {
      const double t = (i + 1) * hb;
      const double alpha = ActivationOfDrive(drive_at(t));
      const double x0 = x;
      for (int it = 0; it < kMaxNewtonIterations; ++it) {
        const double r = x - x0 - hb * rate(t, x);
        const double slope =
            1.0 + hb * (params.k_s + alpha * BaseForceDerivative(coeffs, x)) /
                      params.eta;
        if (!(slope > 0.0)) {
          throw DomainError("series branch has no stable equilibrium", x);
        }
        const double dx = r / slope;
        x -= dx;
        if (std::abs(dx) <= kDeformationTol) break;
      }
    }
  }
  out.state.x = x;
  const double x_dot =
      DeformationRate(params, coeffs, alpha_end, x, eps_end, eps_dot);
  out.force = params.k_s * (eps_end - x) + params.eta * (eps_dot - x_dot);
  return out;
}

MuscleStepResult MuscleStep(const MuscleState& state,
                            const MuscleDynamicParams& params,
                            const PadeCoefficients& coeffs,
                            const ActivationMap& map, double u, double eps,
                            double eps_dot, double dt) {
  return MuscleStep(state, params, coeffs, ActivationFromCommand(map, u).alpha,
                    eps, eps_dot, dt);
}

ConstraintReport ValidateShapeConstraints(const PadeCoefficients& c,
                                          StrainInterval interval,
                                          int grid_points,
                                          double near_zero_fraction) {
  if (!(interval.lo < interval.hi)) {
    throw ConfigError("constraint interval requires lo < hi");
  }
  grid_points = std::max(grid_points, 1000);
  ConstraintReport report;
  const double step = (interval.hi - interval.lo) / (grid_points - 1);
  auto z_at = [&](int i) {
    return i == grid_points - 1 ? interval.hi : interval.lo + i * step;
  };

  // Denominator first: the remaining checks need a finite curve.
  double worst_den = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double z = z_at(i);
    const double den = 1.0 + c.d1 * z;
    if (!(den > 0.0) && (report.denominator.passed || den < worst_den)) {
      report.denominator = {false, z, den};
      worst_den = den;
    }
  }
  if (!report.denominator.passed) {
    report.positivity = {false, report.denominator.worst_z, 0.0};
    report.monotonicity = {false, report.denominator.worst_z, 0.0};
    report.near_zero = {false, report.denominator.worst_z, 0.0};
    return report;
  }

  double f_min = 0.0, f_max = 0.0;
  int i_min = 0;
  for (int i = 0; i < grid_points; ++i) {
    const double z = z_at(i);
    const double f = BaseForce(c, z);
    if (i == 0 || f < f_min) {
      f_min = f;
      i_min = i;
    }
    if (i == 0 || f > f_max) f_max = f;
    if (f < 0.0 &&
        (report.positivity.passed || f < report.positivity.worst_value)) {
      report.positivity = {false, z, f};
    }
  }
  report.max_contraction = z_at(i_min);

  // A curve whose minimum sits at the lower end never contracts; it is then
  // checked over the whole interval.
  const int monotone_end = i_min == 0 ? grid_points : i_min;
  for (int i = 0; i < monotone_end; ++i) {
    const double z = z_at(i);
    const double slope = BaseForceDerivative(c, z);
    if (slope > 0.0 && (report.monotonicity.passed ||
                        slope > report.monotonicity.worst_value)) {
      report.monotonicity = {false, z, slope};
    }
  }

  report.near_zero.worst_z = report.max_contraction;
  report.near_zero.worst_value = f_min;
  report.near_zero.passed =
      f_max > 0.0 && std::abs(f_min) <= near_zero_fraction * f_max;
  return report;
}

}  // namespace softjoint
