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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <Eigen/Dense>

#include "softjoint/csv.h"
#include "softjoint/errors.h"

namespace softjoint {
namespace {

constexpr double kTimeTolerance = 1e-6;
constexpr double kPenalty = 1e12;
constexpr int kSearchGrid = 1001;
constexpr int kRestarts = 2;

const std::vector<std::string>& TrajectoryColumns() {
  static const std::vector<std::string> columns = {"t", "u", "F", "eps",
                                                   "eps_dot"};
  return columns;
}

using Objective = std::function<double(const std::vector<double>&)>;

struct SimplexResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

double GslTrampoline(const gsl_vector* v, void* params) {
  const auto& objective = *static_cast<const Objective*>(params);
  std::vector<double> x(v->size);
  for (size_t i = 0; i < v->size; ++i) x[i] = gsl_vector_get(v, i);
  const double f = objective(x);
  return std::isfinite(f) ? f : std::numeric_limits<double>::max();
}

// Nelder-Mead (GSL nmsimplex2) with restarts from the best vertex. The trace
// holds the best value after every iteration and never increases.
SimplexResult MinimizeSimplex(const Objective& objective,
                              const std::vector<double>& x0, double step,
                              int max_iterations, double size_tol) {
  const size_t n = x0.size();
  gsl_multimin_function fn;
  fn.n = n;
  fn.f = &GslTrampoline;
  fn.params = const_cast<Objective*>(&objective);

  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* steps = gsl_vector_alloc(n);
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  for (size_t i = 0; i < n; ++i) gsl_vector_set(x, i, x0[i]);

  SimplexResult out;
  out.x = x0;
  out.f = GslTrampoline(x, fn.params);
  out.trace.push_back(out.f);
  for (int restart = 0; restart <= kRestarts; ++restart) {
    gsl_vector_set_all(steps, step);
    gsl_multimin_fminimizer_set(s, &fn, x, steps);
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && out.iterations < max_iterations) {
      ++out.iterations;
      if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
      const double best = std::min(out.trace.back(), s->fval);
      out.trace.push_back(best);
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s),
                                      size_tol);
    }
    if (s->fval <= out.f) {
      out.f = s->fval;
      for (size_t i = 0; i < n; ++i) out.x[i] = gsl_vector_get(s->x, i);
    }
    for (size_t i = 0; i < n; ++i) gsl_vector_set(x, i, out.x[i]);
    if (out.iterations >= max_iterations) break;
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(steps);
  gsl_vector_free(x);
  return out;
}

double ConstraintViolation(const ConstraintReport& r) {
  double v = 0.0;
  for (const ConstraintCheck* c :
       {&r.positivity, &r.monotonicity, &r.denominator, &r.near_zero}) {
    if (!c->passed) v += 1.0 + std::abs(c->worst_value);
  }
  return v;
}

std::string DescribeStarts(const std::vector<StartDiagnostics>& starts) {
  std::ostringstream os;
  for (size_t i = 0; i < starts.size(); ++i) {
    os << "\n  start " << i << ": objective " << starts[i].objective
       << (starts[i].feasible ? " feasible" : " infeasible") << " after "
       << starts[i].iterations << " iterations";
  }
  return os.str();
}

// Active-element strain from the series branch driven by the measured force:
// eta x' = eta eps' + k_s (eps - x) - F, with eps and F linear per interval.
std::vector<double> RecoverDeformation(const Trajectory& tr,
                                       const MuscleDynamicParams& p) {
  const auto& s = tr.samples;
  std::vector<double> x(s.size());
  if (s.empty()) return x;
  if (!(p.k_s > 0.0)) throw ConfigError("series recovery needs k_s > 0");
  x[0] = s[0].eps - s[0].F / p.k_s;
  const double dt = tr.dt();
  for (size_t k = 0; k + 1 < s.size(); ++k) {
    if (p.eta == 0.0) {
      x[k + 1] = s[k + 1].eps - s[k + 1].F / p.k_s;
      continue;
    }
    const double rate = p.k_s / p.eta;
    const int n = std::max(1, static_cast<int>(std::ceil(dt * rate / 0.5)));
    const double h = dt / n;
    const double eps_dot = (s[k + 1].eps - s[k].eps) / dt;
    const double f_dot = (s[k + 1].F - s[k].F) / dt;
    auto deriv = [&](double t, double xv) {
      const double eps = s[k].eps + eps_dot * t;
      const double f = s[k].F + f_dot * t;
      return eps_dot + (p.k_s * (eps - xv) - f) / p.eta;
    };
    double xv = x[k];
    for (int i = 0; i < n; ++i) {
      const double t = i * h;
      const double k1 = deriv(t, xv);
      const double k2 = deriv(t + 0.5 * h, xv + 0.5 * h * k1);
      const double k3 = deriv(t + 0.5 * h, xv + 0.5 * h * k2);
      const double k4 = deriv(t + h, xv + h * k3);
      xv += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x[k + 1] = xv;
  }
  return x;
}

// Linearized least squares: y (1 + d1 z) = c0 + c1 z + c2 z^2.
PadeCoefficients LinearizedPade(const std::vector<double>& z,
                                const std::vector<double>& y) {
  Eigen::MatrixXd a(z.size(), 4);
  Eigen::VectorXd b(z.size());
  for (size_t i = 0; i < z.size(); ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = z[i];
    a(i, 2) = z[i] * z[i];
    a(i, 3) = -z[i] * y[i];
    b(i) = y[i];
  }
  const Eigen::Vector4d p = a.colPivHouseholderQr().solve(b);
  return {p(0), p(1), p(2), p(3)};
}

std::vector<double> PadeVector(const PadeCoefficients& c) {
  return {c.c0, c.c1, c.c2, c.d1};
}

double SumSquares(const std::vector<double>& predicted,
                  const std::vector<double>& measured) {
  double s = 0.0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - measured[i];
    s += e * e;
  }
  return s;
}

}  // namespace

void Trajectory::Validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw SchemaError("trajectory rate must be positive");
  }
  const double dt = 1.0 / rate;
  for (size_t k = 0; k < samples.size(); ++k) {
    const TrajectorySample& s = samples[k];
    for (double v : {s.t, s.u, s.F, s.eps, s.eps_dot}) {
      if (!std::isfinite(v)) {
        throw SchemaError("non-finite value in trajectory sample " +
                          std::to_string(k));
      }
    }
    if (k == 0) continue;
    const double step = s.t - samples[k - 1].t;
    if (!(step > 0.0)) {
      throw SchemaError("trajectory time is not strictly increasing at sample " +
                        std::to_string(k));
    }
    if (std::abs(s.t - (samples[0].t + k * dt)) > kTimeTolerance) {
      throw SchemaError("trajectory sample " + std::to_string(k) +
                        " is off the uniform grid");
    }
  }
}

Trajectory ReadTrajectory(std::istream& is) {
  const auto rows = csv::ReadTable(is, TrajectoryColumns());
  Trajectory tr;
  tr.samples.reserve(rows.size());
  for (const auto& r : rows) tr.samples.push_back({r[0], r[1], r[2], r[3], r[4]});
  if (tr.samples.size() >= 2) {
    const double dt = tr.samples[1].t - tr.samples[0].t;
    if (!(dt > 0.0)) {
      throw SchemaError("trajectory time is not strictly increasing");
    }
    tr.rate = 1.0 / dt;
  }
  tr.Validate();
  return tr;
}

Trajectory LoadTrajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file " + path);
  return ReadTrajectory(in);
}

void WriteTrajectory(std::ostream& os, const Trajectory& trajectory) {
  const auto& cols = TrajectoryColumns();
  for (size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const TrajectorySample& s : trajectory.samples) {
    csv::WriteRow(os, {s.t, s.u, s.F, s.eps, s.eps_dot});
  }
}

ExcitationProfile RampProfile(double u, double eps_lo, double eps_hi,
                              double eps_rate, double rate) {
  if (!(eps_hi > eps_lo) || !(eps_rate > 0.0) || !(rate > 0.0)) {
    throw ConfigError("ramp profile needs eps_hi > eps_lo and positive rates");
  }
  const double half = (eps_hi - eps_lo) / eps_rate;
  const int n = static_cast<int>(std::lround(2.0 * half * rate)) + 1;
  ExcitationProfile p;
  p.rate = rate;
  p.u.assign(n, u);
  p.eps.resize(n);
  for (int k = 0; k < n; ++k) {
    const double t = k / rate;
    p.eps[k] = t <= half ? eps_lo + eps_rate * t
                         : eps_hi - eps_rate * (t - half);
  }
  return p;
}

ExcitationProfile TransientProfile(double duration, double eps_mean,
                                   double eps_amplitude, double max_command,
                                   std::uint64_t seed, double rate) {
  if (!(duration > 0.0) || !(rate > 0.0) || !(max_command > 0.0)) {
    throw ConfigError("transient profile needs positive duration and rate");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> low_dwell(0.1, 0.3);
  std::uniform_real_distribution<double> high_dwell(0.5, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double p1 = phase(rng), p2 = phase(rng);
  const int n = static_cast<int>(std::lround(duration * rate)) + 1;
  ExcitationProfile p;
  p.rate = rate;
  p.u.resize(n);
  p.eps.resize(n);
  // Alternate between the lower and upper fifths of the command range.
  std::uniform_real_distribution<double> fifth(0.0, 0.2 * max_command);
  bool high = false;
  double u = fifth(rng);
  double next_switch = low_dwell(rng);
  for (int k = 0; k < n; ++k) {
    const double t = k / rate;
    if (t >= next_switch) {
      high = !high;
      u = high ? max_command - fifth(rng) : fifth(rng);
      next_switch += high ? high_dwell(rng) : low_dwell(rng);
    }
    p.u[k] = u;
    p.eps[k] = eps_mean +
               eps_amplitude *
                   (0.15 * std::sin(2.0 * std::numbers::pi * 0.7 * t + p1) +
                    0.85 * std::sin(2.0 * std::numbers::pi * 4.1 * t + p2));
  }
  return p;
}

std::vector<double> SimulateForce(const MuscleModel& model,
                                  const ActivationMap& map,
                                  const ExcitationProfile& profile,
                                  int substeps) {
  if (profile.u.size() != profile.eps.size()) {
    throw ConfigError("command and strain profiles differ in length");
  }
  if (!(profile.rate > 0.0) || substeps < 1) {
    throw ConfigError("profile rate and substeps must be positive");
  }
  const size_t n = profile.u.size();
  std::vector<double> force(n);
  if (n == 0) return force;
  const MuscleDynamicParams& p = model.dynamics;
  const double alpha0 = ActivationFromCommand(map, profile.u[0]).alpha;
  MuscleState state{alpha0, profile.eps[0]};
  if (p.k_s > 0.0) {
    state.x = SolveQuasiStaticDeformation(p, model.coeffs, alpha0,
                                          profile.eps[0]);
    force[0] = p.k_s * (profile.eps[0] - state.x);
  } else {
    force[0] = alpha0 * BaseForce(model.coeffs, state.x);
  }
  const double dt = 1.0 / profile.rate;
  const double h = dt / substeps;
  for (size_t k = 0; k + 1 < n; ++k) {
    const double eps_dot = (profile.eps[k + 1] - profile.eps[k]) / dt;
    MuscleStepResult r;
    for (int i = 0; i < substeps; ++i) {
      r = MuscleStep(state, p, model.coeffs, map, profile.u[k],
                     profile.eps[k] + eps_dot * i * h, eps_dot, h);
      state = r.state;
    }
    force[k + 1] = r.force;
  }
  return force;
}

Trajectory SynthesizeTrajectory(const MuscleModel& model,
                                const ActivationMap& map,
                                const ExcitationProfile& profile,
                                double noise_std, std::uint64_t seed,
                                int substeps) {
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  const std::vector<double> force =
      SimulateForce(model, map, profile, substeps);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Trajectory tr;
  tr.rate = profile.rate;
  const size_t n = force.size();
  tr.samples.resize(n);
  for (size_t k = 0; k < n; ++k) {
    TrajectorySample& s = tr.samples[k];
    s.t = k / profile.rate;
    s.u = profile.u[k];
    s.eps = profile.eps[k];
    // Slope of the interval that ends at this sample (the first sample uses
    // the interval that starts there).
    if (n > 1) {
      const size_t j = k == 0 ? 1 : k;
      s.eps_dot = (profile.eps[j] - profile.eps[j - 1]) * profile.rate;
    }
    s.F = force[k] + (noise_std > 0.0 ? noise_std * noise(rng) : 0.0);
  }
  return tr;
}

ExcitationProfile ProfileOf(const Trajectory& trajectory) {
  ExcitationProfile p;
  p.rate = trajectory.rate;
  p.u.reserve(trajectory.samples.size());
  p.eps.reserve(trajectory.samples.size());
  for (const TrajectorySample& s : trajectory.samples) {
    p.u.push_back(s.u);
    p.eps.push_back(s.eps);
  }
  return p;
}

QuasiStaticFit FitQuasiStatic(const std::vector<Trajectory>& data,
                              const QuasiStaticOptions& options) {
  // Per selected sample: strain (or recovered deformation), force, alpha.
  std::vector<double> z, force, alpha;
  for (const Trajectory& tr : data) {
    tr.Validate();
    const std::vector<double> x =
        options.series ? RecoverDeformation(tr, *options.series)
                       : std::vector<double>();
    for (size_t k = 0; k < tr.samples.size(); ++k) {
      const TrajectorySample& s = tr.samples[k];
      const double a = ActivationFromCommand(options.map, s.u).alpha;
      if (std::abs(s.eps_dot) >= options.max_strain_rate ||
          a <= options.min_activation) {
        continue;
      }
      z.push_back(options.series ? x[k] : s.eps);
      force.push_back(s.F);
      alpha.push_back(a);
    }
  }
  constexpr int kPadeParameters = 4;
  if (z.size() < 8 * kPadeParameters) {
    throw InsufficientDataError(
        "quasi-static fit needs at least 32 slow, high-activation samples; got " +
        std::to_string(z.size()));
  }
  const size_t n = z.size();
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) y[i] = force[i] / alpha[i];

  QuasiStaticFit fit;
  fit.samples = static_cast<int>(n);
  fit.interval = options.interval;
  if (!(fit.interval.hi > fit.interval.lo)) {
    const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    fit.interval = {*lo, *hi};
  }

  const bool with_ks = !options.series && options.fit_series_stiffness;
  const int dims = kPadeParameters + (with_ks ? 1 : 0);
  const PadeCoefficients linear =
      options.initial ? *options.initial : LinearizedPade(z, y);
  // Pade coordinates are scaled by the linearized solution; k_s is searched
  // as log(k_s).
  std::vector<double> scale = PadeVector(linear);
  for (double& s : scale) {
    if (std::abs(s) < 1e-3) s = std::copysign(1e-3, s);
  }
  auto coeffs_of = [&](const std::vector<double>& v) {
    return PadeCoefficients{v[0] * scale[0], v[1] * scale[1], v[2] * scale[2],
                            v[3] * scale[3]};
  };
  const Objective objective = [&](const std::vector<double>& v) {
    const PadeCoefficients c = coeffs_of(v);
    const ConstraintReport report =
        ValidateShapeConstraints(c, fit.interval, kSearchGrid);
    if (!report.AllPassed()) {
      return kPenalty * (1.0 + ConstraintViolation(report));
    }
    const double inv_ks = with_ks ? std::exp(-v[4]) : 0.0;
    double s = 0.0;
    try {
      for (size_t i = 0; i < n; ++i) {
        // Model deformation from k_s (eps - x) = alpha F_base(x); using the
        // measured force here would put its noise into the regressor.
        double x = z[i];
        if (with_ks) {
          x = z[i] - force[i] * inv_ks;
          for (int it = 0; it < 3; ++it) {
            const double r = x - z[i] + alpha[i] * BaseForce(c, x) * inv_ks;
            x -= r / (1.0 + alpha[i] * BaseForceDerivative(c, x) * inv_ks);
          }
        }
        const double e = BaseForce(c, x) - y[i];
        s += e * e;
      }
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  };

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> jitter(0.0, 0.3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_ks_lo = std::log(options.k_s_lower);
  const double log_ks_hi = std::log(options.k_s_upper);
  bool have_best = false;
  SimplexResult best;
  for (int start = 0; start < options.starts; ++start) {
    std::vector<double> v0(dims, 1.0);
    if (start > 0) {
      for (int i = 0; i < kPadeParameters; ++i) v0[i] = std::exp(jitter(rng));
    }
    if (with_ks) {
      // The first start is effectively rigid.
      v0[4] = start == 0 ? log_ks_hi
                         : log_ks_lo + (log_ks_hi - log_ks_lo) * unit(rng);
    }
    StartDiagnostics diag;
    diag.initial = PadeVector(coeffs_of(v0));
    if (with_ks) diag.initial.push_back(std::exp(v0[4]));
    const SimplexResult r =
        MinimizeSimplex(objective, v0, 0.1, options.max_iterations, 1e-12);
    const PadeCoefficients c = coeffs_of(r.x);
    diag.final = PadeVector(c);
    if (with_ks) diag.final.push_back(std::exp(r.x[4]));
    diag.objective = r.f;
    diag.iterations = r.iterations;
    diag.feasible = std::isfinite(r.f) &&
                    ValidateShapeConstraints(c, fit.interval).AllPassed();
    fit.starts.push_back(diag);
    if (diag.feasible && (!have_best || r.f < best.f)) {
      have_best = true;
      best = r;
    }
  }
  if (!have_best) {
    throw FitError("no quasi-static start satisfied the shape constraints:" +
                   DescribeStarts(fit.starts));
  }
  fit.coeffs = coeffs_of(best.x);
  if (with_ks) fit.series_stiffness = std::exp(best.x[4]);
  fit.objective = best.f;
  fit.trace = best.trace;
  fit.constraints = ValidateShapeConstraints(fit.coeffs, fit.interval);
  return fit;
}

DynamicsFit FitDynamics(const std::vector<Trajectory>& data,
                        const PadeCoefficients& coeffs,
                        const DynamicsOptions& options) {
  std::vector<ExcitationProfile> profiles;
  std::vector<double> measured;
  for (const Trajectory& tr : data) {
    tr.Validate();
    profiles.push_back(ProfileOf(tr));
    for (const TrajectorySample& s : tr.samples) measured.push_back(s.F);
  }
  constexpr int kParameters = 3;
  if (measured.size() < 8 * kParameters) {
    throw InsufficientDataError("dynamics fit needs at least 24 samples; got " +
                                std::to_string(measured.size()));
  }

  auto params_of = [](const std::vector<double>& v) {
    return MuscleDynamicParams{std::exp(v[0]), std::exp(v[1]), std::exp(v[2])};
  };
  auto predict = [&](const MuscleDynamicParams& p) {
    std::vector<double> out;
    out.reserve(measured.size());
    const MuscleModel model{coeffs, p};
    for (const ExcitationProfile& prof : profiles) {
      const std::vector<double> f =
          SimulateForce(model, options.map, prof, options.substeps);
      out.insert(out.end(), f.begin(), f.end());
    }
    return out;
  };
  const Objective objective = [&](const std::vector<double>& v) {
    try {
      return SumSquares(predict(params_of(v)), measured);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::mt19937_64 rng(options.seed);
  const double lo[3] = {std::log(options.lower.k_s), std::log(options.lower.eta),
                        std::log(options.lower.tau_a)};
  const double hi[3] = {std::log(options.upper.k_s), std::log(options.upper.eta),
                        std::log(options.upper.tau_a)};
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  DynamicsFit fit;
  bool have_best = false;
  SimplexResult best;
  for (int start = 0; start < options.starts; ++start) {
    std::vector<double> v0(kParameters);
    for (int i = 0; i < kParameters; ++i) {
      v0[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    }
    if (start == 0 && options.initial) {
      v0 = {std::log(options.initial->k_s), std::log(options.initial->eta),
            std::log(options.initial->tau_a)};
    }
    StartDiagnostics diag;
    const MuscleDynamicParams p0 = params_of(v0);
    diag.initial = {p0.k_s, p0.eta, p0.tau_a};
    const SimplexResult r =
        MinimizeSimplex(objective, v0, 0.5, options.max_iterations, 1e-6);
    const MuscleDynamicParams p = params_of(r.x);
    diag.final = {p.k_s, p.eta, p.tau_a};
    diag.objective = r.f;
    diag.iterations = r.iterations;
    diag.feasible = std::isfinite(r.f) && r.f < std::numeric_limits<double>::max();
    fit.starts.push_back(diag);
    if (diag.feasible && (!have_best || r.f < best.f)) {
      have_best = true;
      best = r;
    }
  }
  if (!have_best) {
    throw FitError("every dynamics start failed to simulate:" +
                   DescribeStarts(fit.starts));
  }
  fit.params = params_of(best.x);
  fit.objective = best.f;
  fit.trace = best.trace;

  // Conditioning of the force sensitivity to the log parameters.
  Eigen::MatrixXd jac(measured.size(), kParameters);
  constexpr double kStep = 1e-4;
  for (int i = 0; i < kParameters; ++i) {
    std::vector<double> up = best.x, down = best.x;
    up[i] += kStep;
    down[i] -= kStep;
    const std::vector<double> fu = predict(params_of(up));
    const std::vector<double> fd = predict(params_of(down));
    for (size_t k = 0; k < measured.size(); ++k) {
      jac(k, i) = (fu[k] - fd[k]) / (2.0 * kStep);
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const auto& sv = svd.singularValues();
  fit.condition_number = sv(kParameters - 1) > 0.0
                             ? sv(0) / sv(kParameters - 1)
                             : std::numeric_limits<double>::infinity();
  if (!(fit.condition_number <= options.condition_limit)) {
    fit.ill_conditioned = true;
    std::ostringstream os;
    os << "dynamic parameters are poorly determined by this data (sensitivity "
          "condition number "
       << fit.condition_number
       << "); the recording may lack command or strain transients";
    fit.warning = os.str();
  }
  return fit;
}

IdentificationResult Identify(const std::vector<Trajectory>& slow,
                              const std::vector<Trajectory>& transient,
                              const IdentificationOptions& options) {
  IdentificationResult out;
  QuasiStaticOptions qs = options.quasi_static;
  qs.map = options.map;
  qs.starts = options.starts;
  qs.seed = options.seed;
  DynamicsOptions dyn = options.dynamics;
  dyn.map = options.map;
  dyn.starts = options.starts;
  dyn.seed = options.seed;

  out.quasi_static_initial = FitQuasiStatic(slow, qs);
  out.dynamics_initial =
      FitDynamics(transient, out.quasi_static_initial.coeffs, dyn);

  qs.starts = 1;
  qs.initial = out.quasi_static_initial.coeffs;
  qs.series = out.dynamics_initial.params;
  qs.interval = out.quasi_static_initial.interval;
  out.quasi_static = FitQuasiStatic(slow, qs);

  dyn.starts = 1;
  dyn.initial = out.dynamics_initial.params;
  out.dynamics = FitDynamics(transient, out.quasi_static.coeffs, dyn);
  out.model = {out.quasi_static.coeffs, out.dynamics.params};
  if (!options.joint_refinement) return out;

  std::vector<ExcitationProfile> profiles;
  std::vector<double> measured;
  for (const auto* set : {&slow, &transient}) {
    for (const Trajectory& tr : *set) {
      profiles.push_back(ProfileOf(tr));
      for (const TrajectorySample& s : tr.samples) measured.push_back(s.F);
    }
  }
  const StrainInterval interval = out.quasi_static.interval;
  std::vector<double> scale = PadeVector(out.model.coeffs);
  for (double& s : scale) {
    if (std::abs(s) < 1e-3) s = std::copysign(1e-3, s);
  }
  auto model_of = [&](const std::vector<double>& v) {
    return MuscleModel{{v[0] * scale[0], v[1] * scale[1], v[2] * scale[2],
                        v[3] * scale[3]},
                       {std::exp(v[4]), std::exp(v[5]), std::exp(v[6])}};
  };
  const Objective objective = [&](const std::vector<double>& v) {
    const MuscleModel m = model_of(v);
    const ConstraintReport report =
        ValidateShapeConstraints(m.coeffs, interval, kSearchGrid);
    if (!report.AllPassed()) {
      return kPenalty * (1.0 + ConstraintViolation(report));
    }
    try {
      double sum = 0.0;
      size_t offset = 0;
      for (const ExcitationProfile& prof : profiles) {
        const std::vector<double> f =
            SimulateForce(m, options.map, prof, dyn.substeps);
        for (size_t k = 0; k < f.size(); ++k) {
          const double e = f[k] - measured[offset + k];
          sum += e * e;
        }
        offset += f.size();
      }
      return sum;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const MuscleDynamicParams& d = out.model.dynamics;
  const std::vector<double> v0 = {1.0, 1.0, 1.0, 1.0, std::log(d.k_s),
                                  std::log(d.eta), std::log(d.tau_a)};
  const SimplexResult r = MinimizeSimplex(objective, v0, 0.02,
                                          options.joint_max_iterations, 1e-9);
  const MuscleModel polished = model_of(r.x);
  if (r.f < kPenalty &&
      ValidateShapeConstraints(polished.coeffs, interval).AllPassed()) {
    out.model = polished;
  }
  out.joint_trace = r.trace;
  return out;
}

FitReport ScorePredictions(const std::vector<double>& predicted,
                           const std::vector<double>& measured) {
  if (predicted.size() != measured.size()) {
    throw ConfigError("prediction and measurement lengths differ");
  }
  FitReport report;
  const size_t n = measured.size();
  if (n == 0) return report;
  report.residuals.resize(n);
  double mean = 0.0;
  for (double m : measured) mean += m;
  mean /= n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < n; ++i) {
    report.residuals[i] = predicted[i] - measured[i];
    ss_res += report.residuals[i] * report.residuals[i];
    ss_tot += (measured[i] - mean) * (measured[i] - mean);
  }
  report.rmse = std::sqrt(ss_res / n);
  report.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot
                                  : (ss_res == 0.0 ? 1.0 : 0.0);
  return report;
}

FitReport EvaluateFit(const MuscleModel& model, const ActivationMap& map,
                      const std::vector<Trajectory>& data,
                      StrainInterval interval, int substeps) {
  std::vector<double> predicted, measured;
  for (const Trajectory& tr : data) {
    tr.Validate();
    const std::vector<double> f =
        SimulateForce(model, map, ProfileOf(tr), substeps);
    predicted.insert(predicted.end(), f.begin(), f.end());
    for (const TrajectorySample& s : tr.samples) measured.push_back(s.F);
  }
  FitReport report = ScorePredictions(predicted, measured);
  report.constraints = ValidateShapeConstraints(model.coeffs, interval);
  return report;
}

}  // namespace softjoint
