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

#include "softjoint/contact.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "softjoint/csv.h"
#include "softjoint/errors.h"

namespace softjoint {
namespace {

const std::vector<std::string>& LogColumns() {
  static const std::vector<std::string> kColumns = {
      "t",       "theta",   "theta_dot", "T_des", "K_des",
      "tau_ext", "alpha1",  "alpha2",    "K_est"};
  return kColumns;
}

// Least-squares slope of log(y) against t; returns the decay constant.
double FitDecay(const std::vector<double>& t, const std::vector<double>& y) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  int n = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (!(y[i] > 0.0)) continue;
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  const double den = n * stt - st * st;
  if (den == 0.0) return 0.0;
  const double slope = (n * sty - st * sy) / den;
  if (!(slope < 0.0)) return std::numeric_limits<double>::infinity();
  return -1.0 / slope;
}

}  // namespace

void StiffnessPolicy::Validate() const {
  if (!(K_low <= K_high)) throw ConfigError("policy requires K_low <= K_high");
  if (!(alpha_d > 0.0)) throw ConfigError("policy alpha_d must be > 0");
}

std::string PolicyName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kDepthAdaptive:
      return "bio";
    case PolicyKind::kFixedLow:
      return "fixed_low";
    case PolicyKind::kFixedHigh:
      return "fixed_high";
  }
  return "unknown";
}

double ContactTorque(const Surface& surface, double theta, double theta_dot) {
  const double delta = theta - surface.theta_contact;
  if (delta <= 0.0) return 0.0;
  const double reaction = -(surface.K_env * delta + surface.D_env * theta_dot);
  // Non-adhesive: the surface only pushes back.
  return reaction > 0.0 ? 0.0 : reaction;
}

double DesiredStiffness(const StiffnessPolicy& policy, double delta) {
  switch (policy.kind) {
    case PolicyKind::kFixedLow:
      return policy.K_low;
    case PolicyKind::kFixedHigh:
      return policy.K_high;
    case PolicyKind::kDepthAdaptive:
      break;
  }
  delta = std::max(0.0, delta);
  const double ad = policy.alpha_d * delta;
  const double span = policy.K_high - policy.K_low;
  if (policy.increasing) return policy.K_low + span * ad / (1.0 + ad);
  return policy.K_low + span / (1.0 + ad);
}

double DesiredTorqueContact(double theta, double theta_dot,
                            const JointParams& joint,
                            const ContactTorqueLaw& law) {
  return law.preload_torque + GravityTorque(joint, theta) -
         law.B_eff * theta_dot;
}

void WriteTrialLogCsv(std::ostream& os, const TrialLog& log) {
  const auto& cols = LogColumns();
  for (size_t i = 0; i < cols.size(); ++i) {
    os << (i ? "," : "") << cols[i];
  }
  os << '\n';
  for (const TrialSample& s : log.samples) {
    csv::WriteRow(os, {s.t, s.theta, s.theta_dot, s.T_des, s.K_des, s.tau_ext,
                       s.alpha1, s.alpha2, s.K_est});
  }
}

TrialLog ReadTrialLogCsv(std::istream& is) {
  TrialLog log;
  for (const auto& r : csv::ReadTable(is, LogColumns())) {
    log.samples.push_back({r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]});
  }
  return log;
}

TrialLog RunContactTrial(const StiffnessPolicy& policy, const Surface& surface,
                         const ContactTrialConfig& config) {
  policy.Validate();
  if (!(config.dt > 0.0) || !(config.horizon > 0.0)) {
    throw ConfigError("contact trial needs dt > 0 and horizon > 0");
  }
  const JointPlant plant(config.joint, config.muscle);
  ControllerConfig ctrl_cfg = config.controller;
  ctrl_cfg.mode = ControlMode::kDirectTargets;
  Controller controller(plant, ctrl_cfg);

  const double theta0 = surface.theta_contact - config.start_offset;
  auto targets_at = [&](double theta, double theta_dot) {
    ControlTargets t;
    t.K_des = DesiredStiffness(policy, theta - surface.theta_contact);
    t.T_des = DesiredTorqueContact(theta, theta_dot, config.joint, config.law) -
              config.D_imp * theta_dot;
    return t;
  };

  // Start with the muscles already settled on the initial targets.
  JointState state;
  state.theta = theta0;
  const ControlTargets initial = targets_at(theta0, config.approach_velocity);
  InnerSolution init = InnerSolve(plant, initial, plant.RestState(theta0, {}),
                                  {0.5, 0.5}, config.dt, ctrl_cfg.solver);
  ActivationPair alpha0 = plant.ApplyPreload(theta0, init.alpha);
  state = plant.RestState(theta0, alpha0);
  state.theta_dot = config.approach_velocity;
  controller.Reset(alpha0);

  const auto contact = [&surface](double theta, double theta_dot) {
    return ContactTorque(surface, theta, theta_dot);
  };

  TrialLog log;
  const int steps = static_cast<int>(std::llround(config.horizon / config.dt));
  log.samples.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = k * config.dt;
    TrialSample s;
    s.t = t;
    s.theta = state.theta;
    s.theta_dot = state.theta_dot;
    s.tau_ext = contact(state.theta, state.theta_dot);
    try {
      ControlReferences refs;
      refs.targets = targets_at(state.theta, state.theta_dot);
      const ControlOutput out = controller.Tick(refs, state, config.dt);
      s.T_des = refs.targets.T_des;
      s.K_des = refs.targets.K_des;
      s.alpha1 = out.alpha.alpha1;
      s.alpha2 = out.alpha.alpha2;
      s.K_est = out.diagnostics.K_est;
      log.samples.push_back(s);
      if (k == steps) break;
      state = plant.Step(state, out.alpha, contact, config.dt);
    } catch (const Error& e) {
      log.aborted = true;
      log.error = e.what();
      break;
    }
  }
  return log;
}

ContactMetrics ComputeMetrics(const TrialLog& log, const MetricsConfig& cfg) {
  const auto& s = log.samples;
  if (s.size() < 2) throw Error("metrics need at least two log samples");
  size_t first_contact = s.size();
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i].theta > cfg.theta_contact) {
      first_contact = i;
      break;
    }
  }
  if (first_contact == s.size()) {
    throw Error("metrics undefined: the log has no contact event");
  }
  const double t_end = s.back().t;
  const double t_contact = s[first_contact].t;

  ContactMetrics m;
  {
    double sum = 0.0;
    int n = 0;
    for (const auto& x : s) {
      if (x.t >= t_end - cfg.steady_window - 1e-12) {
        sum += x.theta;
        ++n;
      }
    }
    m.theta_ss = sum / n;
  }

  for (size_t i = first_contact; i < s.size(); ++i) {
    if (s[i].t > t_contact + cfg.peak_window + 1e-12) break;
    m.peak = std::max(m.peak, std::abs(s[i].tau_ext));
  }

  for (size_t i = 1; i < s.size(); ++i) {
    if (s[i - 1].t < cfg.impulse_start - 1e-12) continue;
    m.impulse += 0.5 * (s[i].t - s[i - 1].t) *
                 (std::abs(s[i].tau_ext) + std::abs(s[i - 1].tau_ext));
  }

  const double step = std::abs(m.theta_ss - cfg.theta_contact);
  size_t i90 = first_contact;
  for (; i90 < s.size(); ++i90) {
    if (std::abs(s[i90].theta - m.theta_ss) <= 0.1 * step) break;
  }
  m.t90 = i90 < s.size() ? s[i90].t - t_contact
                         : std::numeric_limits<double>::infinity();

  const double band =
      cfg.band_fraction * std::max(step, cfg.band_floor);
  int in_band = 0, total = 0;
  for (const auto& x : s) {
    if (x.t < cfg.stability_start - 1e-12) continue;
    ++total;
    if (std::abs(x.theta - m.theta_ss) <= band) ++in_band;
  }
  m.stability = total > 0 ? 100.0 * in_band / total : 0.0;

  // Envelope: the largest |theta - theta_ss| between consecutive crossings.
  std::vector<double> pt, pv;
  {
    double best = 0.0, best_t = 0.0;
    double prev = s[first_contact].theta - m.theta_ss;
    for (size_t i = first_contact + 1; i < s.size(); ++i) {
      const double dev = s[i].theta - m.theta_ss;
      if ((dev > 0.0) != (prev > 0.0)) {
        if (best > 0.0) {
          pt.push_back(best_t);
          pv.push_back(best);
        }
        best = 0.0;
      }
      if (std::abs(dev) > best) {
        best = std::abs(dev);
        best_t = s[i].t;
      }
      prev = dev;
    }
  }
  // Drop crossings at the numerical noise floor of the settled signal.
  {
    const double top = pv.empty() ? 0.0 : *std::max_element(pv.begin(), pv.end());
    std::vector<double> kt, kv;
    for (size_t i = 0; i < pv.size(); ++i) {
      if (pv[i] >= 1e-3 * top) {
        kt.push_back(pt[i]);
        kv.push_back(pv[i]);
      }
    }
    pt.swap(kt);
    pv.swap(kv);
  }
  if (pt.size() >= 3) {
    m.tau_exp = FitDecay(pt, pv);
  } else {
    std::vector<double> t, v;
    const double t_from =
        std::isfinite(m.t90) ? t_contact + m.t90 : t_contact;
    for (const auto& x : s) {
      if (x.t < t_from) continue;
      t.push_back(x.t);
      v.push_back(std::abs(x.theta - m.theta_ss));
    }
    m.tau_exp = FitDecay(t, v);
  }
  return m;
}

}  // namespace softjoint
