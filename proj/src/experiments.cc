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

#include "softjoint/experiments.h"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "softjoint/csv.h"
#include "softjoint/errors.h"
#include "softjoint/identification.h"

namespace softjoint {
namespace {

namespace pt = boost::property_tree;
using Json = nlohmann::json;
using Rows = std::vector<std::vector<double>>;

const std::set<std::string>& KnownSections() {
  static const std::set<std::string> kSections = {
      "experiment", "plant",   "controller", "identify", "generator",
      "decouple",   "compare", "contact",    "bench"};
  return kSections;
}

// Typed access to one INI section. Every key must be consumed; Finish()
// rejects leftovers so typos do not silently fall back to defaults.
class SectionReader {
 public:
  SectionReader(const pt::ptree& tree, std::string name)
      : tree_(tree), name_(std::move(name)) {}

  double Double(const std::string& key, double fallback) {
    const auto raw = Raw(key);
    if (!raw) return fallback;
    double v = 0.0;
    if (!csv::ParseDouble(*raw, &v) || !std::isfinite(v)) {
      throw ConfigError(Where(key) + ": expected a finite number, got '" +
                        *raw + "'");
    }
    return v;
  }

  int Int(const std::string& key, int fallback) {
    const auto raw = Raw(key);
    if (!raw) return fallback;
    int v = 0;
    const auto [end, ec] =
        std::from_chars(raw->data(), raw->data() + raw->size(), v);
    if (ec != std::errc() || end != raw->data() + raw->size()) {
      throw ConfigError(Where(key) + ": expected an integer, got '" + *raw +
                        "'");
    }
    return v;
  }

  std::uint64_t Uint(const std::string& key, std::uint64_t fallback) {
    const auto raw = Raw(key);
    if (!raw) return fallback;
    std::uint64_t v = 0;
    const auto [end, ec] =
        std::from_chars(raw->data(), raw->data() + raw->size(), v);
    if (ec != std::errc() || end != raw->data() + raw->size()) {
      throw ConfigError(Where(key) + ": expected an unsigned integer, got '" +
                        *raw + "'");
    }
    return v;
  }

  bool Bool(const std::string& key, bool fallback) {
    const auto raw = Raw(key);
    if (!raw) return fallback;
    const std::string v = boost::algorithm::to_lower_copy(*raw);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError(Where(key) + ": expected a boolean, got '" + *raw + "'");
  }

  std::string String(const std::string& key, const std::string& fallback) {
    return Raw(key).value_or(fallback);
  }

  std::vector<std::string> Strings(const std::string& key,
                                   std::vector<std::string> fallback) {
    const auto raw = Raw(key);
    if (!raw) return fallback;
    std::vector<std::string> out;
    if (raw->empty()) return out;
    boost::algorithm::split(out, *raw, boost::algorithm::is_any_of(","));
    for (std::string& s : out) {
      boost::algorithm::trim(s);
      if (s.empty()) throw ConfigError(Where(key) + ": empty list entry");
    }
    return out;
  }

  std::vector<double> Doubles(const std::string& key,
                              std::vector<double> fallback) {
    if (!tree_.get_child_optional(key)) return fallback;
    std::vector<double> out;
    for (const std::string& s : Strings(key, {})) {
      double v = 0.0;
      if (!csv::ParseDouble(s, &v) || !std::isfinite(v)) {
        throw ConfigError(Where(key) + ": expected finite numbers, got '" + s +
                          "'");
      }
      out.push_back(v);
    }
    return out;
  }

  void Finish() const {
    for (const auto& [key, child] : tree_) {
      if (!used_.count(key)) {
        throw ConfigError("unknown key '" + key + "' in [" + name_ + "]");
      }
    }
  }

 private:
  std::optional<std::string> Raw(const std::string& key) {
    used_.insert(key);
    const auto child = tree_.get_child_optional(key);
    if (!child) return std::nullopt;
    return boost::algorithm::trim_copy(child->data());
  }

  std::string Where(const std::string& key) const {
    return "[" + name_ + "] " + key;
  }

  const pt::ptree& tree_;
  std::string name_;
  std::set<std::string> used_;
};

ActuatorType ParseActuator(const std::string& name) {
  const std::string v = boost::algorithm::to_lower_copy(name);
  if (v == "pam") return ActuatorType::kPam;
  if (v == "hasel") return ActuatorType::kHasel;
  if (v == "dea") return ActuatorType::kDea;
  throw ConfigError("[plant] actuator: expected pam, hasel or dea, got '" +
                    name + "'");
}

PlantSection ReadPlant(SectionReader& r) {
  PlantSection p;
  JointParams& j = p.joint;
  j.r = r.Double("r", j.r);
  j.L0 = r.Double("L0", j.L0);
  j.J_eq = r.Double("J_eq", j.J_eq);
  j.B_j = r.Double("B_j", j.B_j);
  j.K_j = r.Double("K_j", j.K_j);
  j.m_l = r.Double("m_l", j.m_l);
  j.l_c = r.Double("l_c", j.l_c);
  j.theta_g = r.Double("theta_g", j.theta_g);
  j.g_acc = r.Double("g_acc", j.g_acc);
  j.F_pre = r.Double("F_pre", j.F_pre);
  j.max_velocity = r.Double("max_velocity", j.max_velocity);
  PadeCoefficients& c = p.muscle.coeffs;
  c.c0 = r.Double("c0", c.c0);
  c.c1 = r.Double("c1", c.c1);
  c.c2 = r.Double("c2", c.c2);
  c.d1 = r.Double("d1", c.d1);
  MuscleDynamicParams& d = p.muscle.dynamics;
  d.k_s = r.Double("k_s", d.k_s);
  d.eta = r.Double("eta", d.eta);
  d.tau_a = r.Double("tau_a", d.tau_a);
  p.muscle_units = r.Double("muscle_units", p.muscle_units);
  p.map.type = ParseActuator(r.String("actuator", "hasel"));
  p.map.max_command = r.Double("max_command", p.map.max_command);
  p.dt = r.Double("dt", p.dt);
  return p;
}

ControllerSection ReadController(SectionReader& r) {
  ControllerSection c;
  c.feedback = r.Bool("feedback", c.feedback);
  c.f_T = r.Double("f_T", c.f_T);
  c.f_K = r.Double("f_K", c.f_K);
  c.zeta = r.Double("zeta", c.zeta);
  c.slew_max = r.Double("slew_max", c.slew_max);
  c.lambda = r.Double("lambda", c.lambda);
  c.max_iterations = r.Int("max_iterations", c.max_iterations);
  c.preload = r.Bool("preload", c.preload);
  return c;
}

IdentifySection ReadIdentify(SectionReader& r) {
  IdentifySection s;
  s.slow = r.Strings("slow", {});
  s.transient = r.Strings("transient", {});
  s.test = r.Strings("test", {});
  s.test_fraction = r.Double("test_fraction", s.test_fraction);
  s.starts = r.Int("starts", s.starts);
  s.joint_refinement = r.Bool("joint_refinement", s.joint_refinement);
  s.interval.lo = r.Double("interval_lo", s.interval.lo);
  s.interval.hi = r.Double("interval_hi", s.interval.hi);
  return s;
}

GeneratorSection ReadGenerator(SectionReader& r) {
  GeneratorSection g;
  g.noise_std = r.Double("noise_std", g.noise_std);
  g.rate = r.Double("rate", g.rate);
  g.ramp_levels = r.Doubles("ramp_levels", g.ramp_levels);
  g.ramp_strain_lo = r.Double("ramp_strain_lo", g.ramp_strain_lo);
  g.ramp_strain_hi = r.Double("ramp_strain_hi", g.ramp_strain_hi);
  g.ramp_strain_rate = r.Double("ramp_strain_rate", g.ramp_strain_rate);
  g.transient_trials = r.Int("transient_trials", g.transient_trials);
  g.transient_duration = r.Double("transient_duration", g.transient_duration);
  g.transient_amplitude =
      r.Double("transient_amplitude", g.transient_amplitude);
  return g;
}

DecoupleSection ReadDecouple(SectionReader& r) {
  DecoupleSection d;
  d.theta = r.Double("theta", d.theta);
  d.c_min = r.Double("c_min", d.c_min);
  d.c_max = r.Double("c_max", d.c_max);
  d.c_points = r.Int("c_points", d.c_points);
  d.b_points = r.Int("b_points", d.b_points);
  d.fixed_c = r.Double("fixed_c", d.fixed_c);
  return d;
}

CompareSection ReadCompare(SectionReader& r) {
  CompareSection c;
  c.amplitudes = r.Doubles("amplitudes", c.amplitudes);
  c.duration = r.Double("duration", c.duration);
  c.pulse_width = r.Double("pulse_width", c.pulse_width);
  c.pulse_starts = r.Doubles("pulse_starts", c.pulse_starts);
  c.K_base = r.Double("K_base", c.K_base);
  c.K_step = r.Double("K_step", c.K_step);
  c.T_step = r.Double("T_step", c.T_step);
  c.transition = r.Double("transition", c.transition);
  c.T_up = r.Double("T_up", c.T_up);
  c.T_down = r.Double("T_down", c.T_down);
  c.K_up = r.Double("K_up", c.K_up);
  c.K_down = r.Double("K_down", c.K_down);
  return c;
}

ContactSection ReadContact(SectionReader& r) {
  ContactSection c;
  c.soft.K_env = r.Double("soft_K_env", c.soft.K_env);
  c.soft.D_env = r.Double("soft_D_env", c.soft.D_env);
  c.rigid.K_env = r.Double("rigid_K_env", c.rigid.K_env);
  c.rigid.D_env = r.Double("rigid_D_env", c.rigid.D_env);
  const double theta_contact =
      r.Double("theta_contact", c.soft.theta_contact);
  c.soft.theta_contact = theta_contact;
  c.rigid.theta_contact = theta_contact;
  c.metrics.theta_contact = theta_contact;
  c.K_low = r.Double("K_low", c.K_low);
  c.K_high = r.Double("K_high", c.K_high);
  c.alpha_d = r.Double("alpha_d", c.alpha_d);
  c.adaptive_increasing = r.Bool("adaptive_increasing", c.adaptive_increasing);
  c.law.preload_torque = r.Double("preload_torque", c.law.preload_torque);
  c.law.B_eff = r.Double("B_eff", c.law.B_eff);
  c.D_imp = r.Double("D_imp", c.D_imp);
  c.horizon = r.Double("horizon", c.horizon);
  c.approach_velocity = r.Double("approach_velocity", c.approach_velocity);
  c.start_offset = r.Double("start_offset", c.start_offset);
  MetricsConfig& m = c.metrics;
  m.peak_window = r.Double("peak_window", m.peak_window);
  m.impulse_start = r.Double("impulse_start", m.impulse_start);
  m.stability_start = r.Double("stability_start", m.stability_start);
  m.band_fraction = r.Double("band_fraction", m.band_fraction);
  m.band_floor = r.Double("band_floor", m.band_floor);
  m.steady_window = r.Double("steady_window", m.steady_window);
  return c;
}

BenchSection ReadBench(SectionReader& r) {
  BenchSection b;
  b.ticks = r.Int("ticks", b.ticks);
  b.T_amplitude = r.Double("T_amplitude", b.T_amplitude);
  b.K_mean = r.Double("K_mean", b.K_mean);
  b.K_amplitude = r.Double("K_amplitude", b.K_amplitude);
  b.period = r.Double("period", b.period);
  return b;
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// ---------------------------------------------------------------------------
// Output helpers.

std::string Fmt(double v) { return csv::FormatDouble(v); }

std::string NumericTable(const std::vector<std::string>& header,
                         const Rows& rows) {
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) {
    os << (i ? "," : "") << header[i];
  }
  os << '\n';
  for (const auto& row : rows) csv::WriteRow(os, row);
  return os.str();
}

std::vector<double> Column(const Rows& rows, size_t index) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[index]);
  return out;
}

Json Check(const std::string& name, double value, const std::string& bound,
           bool pass) {
  return Json{{"name", name}, {"value", value}, {"bound", bound},
              {"pass", pass}};
}

ResultBundle NewBundle(const ExperimentConfig& config) {
  ResultBundle b;
  b.scenario = config.scenario;
  b.summary["scenario"] = ScenarioName(config.scenario);
  b.summary["version"] = kVersion;
  b.summary["seed"] = config.seed;
  b.summary["config_sha256"] =
      Sha256Hex(config.source + "\nseed=" + std::to_string(config.seed));
  b.summary["metrics"] = Json::object();
  b.summary["checks"] = Json::array();
  return b;
}

void FinishBundle(ResultBundle* b) {
  Json names = Json::array();
  for (const auto& f : b->files) names.push_back(f.first);
  b->summary["files"] = names;
  bool all = true;
  for (const Json& c : b->summary["checks"]) all = all && c["pass"].get<bool>();
  b->summary["all_checks_passed"] = all;
}

std::uint64_t SubSeed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SmoothStep(double t, double start, double width) {
  if (t <= start) return 0.0;
  if (t >= start + width) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * (t - start) / width);
}

double RelativeError(double fitted, double reference) {
  return reference != 0.0 ? std::abs(fitted / reference - 1.0)
                          : std::abs(fitted);
}

std::vector<Trajectory> LoadAll(const std::vector<std::string>& paths,
                                const std::filesystem::path& base) {
  std::vector<Trajectory> out;
  for (const std::string& p : paths) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    out.push_back(LoadTrajectory(path.string()));
  }
  return out;
}

std::string TrajectoryText(const Trajectory& tr) {
  std::ostringstream os;
  WriteTrajectory(os, tr);
  return os.str();
}

// Quasi-static operating point at joint angle `theta` with drives `alpha`.
std::pair<double, double> TorqueStiffness(const JointPlant& plant, double theta,
                                          ActivationPair alpha, double dt) {
  const JointState state = plant.RestState(theta, alpha);
  return {plant.Torque(state), plant.Stiffness(state, alpha, dt).total};
}

}  // namespace

std::string ScenarioName(Scenario scenario) {
  switch (scenario) {
    case Scenario::kIdentify:
      return "identify";
    case Scenario::kDecoupleMap:
      return "decouple-map";
    case Scenario::kControllerCompare:
      return "controller-compare";
    case Scenario::kContact:
      return "contact";
    case Scenario::kBench:
      return "bench";
  }
  return "contact";
}

Scenario ParseScenario(const std::string& name) {
  for (Scenario s : {Scenario::kIdentify, Scenario::kDecoupleMap,
                     Scenario::kControllerCompare, Scenario::kContact,
                     Scenario::kBench}) {
    if (ScenarioName(s) == name) return s;
  }
  throw ConfigError("unknown scenario '" + name +
                    "' (expected identify, decouple-map, controller-compare, "
                    "contact or bench)");
}

ControllerConfig ControllerSection::ToConfig(const PlantSection& plant) const {
  ControllerConfig c;
  c.mode = ControlMode::kDirectTargets;
  c.feedback = feedback;
  c.f_T = f_T;
  c.f_K = f_K;
  c.zeta = zeta;
  c.limits.slew_max = slew_max;
  c.solver.lambda = lambda;
  c.solver.max_iterations = max_iterations;
  c.preload = preload;
  c.activation_map = plant.map;
  return c;
}

void ExperimentConfig::Validate() const {
  const std::string scenario_name = ScenarioName(scenario);
  auto need = [&](bool present, const std::string& block) {
    Require(present, "scenario " + scenario_name + " needs a [" + block +
                         "] block");
  };
  need(plant.has_value(), "plant");
  plant->joint.Validate();
  plant->muscle.dynamics.Validate();
  Require(plant->muscle_units > 0.0, "[plant] muscle_units must be > 0");
  Require(plant->dt > 0.0, "[plant] dt must be > 0");
  Require(plant->map.max_command > 0.0, "[plant] max_command must be > 0");

  if (controller) {
    const ControllerSection& c = *controller;
    Require(c.f_T > 0.0 && c.f_K > 0.0, "[controller] bandwidths must be > 0");
    Require(c.zeta > 0.0, "[controller] zeta must be > 0");
    Require(c.slew_max > 0.0, "[controller] slew_max must be > 0");
    Require(c.lambda >= 0.0, "[controller] lambda must be >= 0");
    Require(c.max_iterations >= 1, "[controller] max_iterations must be >= 1");
  }

  switch (scenario) {
    case Scenario::kIdentify: {
      need(identify.has_value(), "identify");
      const IdentifySection& id = *identify;
      const bool files = !id.slow.empty() || !id.transient.empty();
      if (files) {
        Require(!id.slow.empty() && !id.transient.empty(),
                "[identify] needs both slow and transient inputs");
      } else {
        Require(generator.has_value(),
                "scenario identify needs input trajectories ([identify] slow "
                "and transient) or a [generator] block");
      }
      Require(id.test_fraction > 0.0 && id.test_fraction < 1.0,
              "[identify] test_fraction must lie in (0, 1)");
      Require(id.starts >= 1, "[identify] starts must be >= 1");
      Require(id.interval.lo < id.interval.hi,
              "[identify] interval_lo must be below interval_hi");
      if (!files) {
        const GeneratorSection& g = *generator;
        Require(g.noise_std >= 0.0, "[generator] noise_std must be >= 0");
        Require(g.rate > 0.0, "[generator] rate must be > 0");
        Require(!g.ramp_levels.empty(), "[generator] ramp_levels is empty");
        for (double a : g.ramp_levels) {
          Require(a > 0.0 && a <= 1.0,
                  "[generator] ramp_levels must lie in (0, 1]");
        }
        Require(g.ramp_strain_lo < g.ramp_strain_hi,
                "[generator] ramp_strain_lo must be below ramp_strain_hi");
        const double slow_limit = QuasiStaticOptions{}.max_strain_rate;
        Require(g.ramp_strain_rate > 0.0 && g.ramp_strain_rate < slow_limit,
                "[generator] ramp_strain_rate must lie in (0, " +
                    Fmt(slow_limit) + "), the quasi-static slice");
        Require(*std::max_element(g.ramp_levels.begin(),
                                  g.ramp_levels.end()) >
                    QuasiStaticOptions{}.min_activation,
                "[generator] needs a ramp level above the quasi-static "
                "activation threshold " +
                    Fmt(QuasiStaticOptions{}.min_activation));
        Require(g.transient_trials >= 2,
                "[generator] transient_trials must be >= 2");
        Require(g.transient_duration > 0.0,
                "[generator] transient_duration must be > 0");
        Require(g.transient_amplitude >= 0.0,
                "[generator] transient_amplitude must be >= 0");
      }
      break;
    }
    case Scenario::kDecoupleMap: {
      need(decouple.has_value(), "decouple");
      const DecoupleSection& d = *decouple;
      Require(d.c_min > 0.0 && d.c_min < d.c_max && d.c_max < 1.0,
              "[decouple] need 0 < c_min < c_max < 1");
      Require(d.c_points >= 2 && d.b_points >= 3,
              "[decouple] need c_points >= 2 and b_points >= 3");
      Require(d.fixed_c > 0.0 && d.fixed_c < 1.0,
              "[decouple] fixed_c must lie in (0, 1)");
      break;
    }
    case Scenario::kControllerCompare: {
      need(compare.has_value(), "compare");
      need(controller.has_value(), "controller");
      const CompareSection& c = *compare;
      Require(!c.amplitudes.empty(), "[compare] amplitudes is empty");
      for (double a : c.amplitudes) {
        Require(a >= 0.0, "[compare] amplitudes must be >= 0");
      }
      Require(c.duration > 0.0, "[compare] duration must be > 0");
      Require(c.pulse_width > 0.0, "[compare] pulse_width must be > 0");
      for (double s : c.pulse_starts) {
        Require(s >= 0.0 && s + c.pulse_width <= c.duration,
                "[compare] pulses must lie inside the trial");
      }
      Require(c.K_base > 0.0, "[compare] K_base must be > 0");
      Require(c.transition > 0.0, "[compare] transition must be > 0");
      break;
    }
    case Scenario::kContact: {
      need(contact.has_value(), "contact");
      need(controller.has_value(), "controller");
      const ContactSection& c = *contact;
      StiffnessPolicy::DepthAdaptive(c.K_low, c.K_high, c.alpha_d).Validate();
      for (const Surface& s : {c.soft, c.rigid}) {
        Require(s.K_env >= 0.0 && s.D_env >= 0.0,
                "[contact] surface stiffness and damping must be >= 0");
      }
      Require(c.horizon > 0.0, "[contact] horizon must be > 0");
      Require(c.D_imp >= 0.0 && c.law.B_eff >= 0.0,
              "[contact] D_imp and B_eff must be >= 0");
      break;
    }
    case Scenario::kBench: {
      need(bench.has_value(), "bench");
      need(controller.has_value(), "controller");
      Require(bench->ticks >= 1, "[bench] ticks must be >= 1");
      Require(bench->period > 0.0, "[bench] period must be > 0");
      break;
    }
  }
}

ExperimentConfig ParseConfig(std::istream& is,
                             const std::filesystem::path& base_dir,
                             std::optional<Scenario> scenario) {
  std::stringstream buffer;
  buffer << is.rdbuf();
  ExperimentConfig config;
  config.source = buffer.str();
  config.base_dir = base_dir;

  pt::ptree tree;
  try {
    std::istringstream in(config.source);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  // The INI reader drops empty sections; headers count as present anyway.
  {
    static const std::regex kHeader(R"(^\s*\[([^\]]*)\]\s*$)");
    std::istringstream in(config.source);
    std::string line;
    std::smatch match;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (std::regex_match(line, match, kHeader) &&
          !tree.get_child_optional(match[1].str())) {
        tree.add_child(match[1].str(), pt::ptree());
      }
    }
  }
  for (const auto& [name, child] : tree) {
    if (child.empty() && !child.data().empty()) {
      throw ConfigError("key '" + name + "' outside any section");
    }
    if (!KnownSections().count(name)) {
      throw ConfigError("unknown section [" + name + "]");
    }
  }

  const auto experiment = tree.get_child_optional("experiment");
  if (experiment) {
    SectionReader r(*experiment, "experiment");
    const std::string name = r.String("scenario", "");
    if (name.empty()) {
      Require(scenario.has_value(), "[experiment] scenario is required");
      config.scenario = *scenario;
    } else {
      config.scenario = ParseScenario(name);
      Require(!scenario || *scenario == config.scenario,
              "config is for scenario " + name + ", not " +
                  ScenarioName(scenario.value_or(config.scenario)));
    }
    config.seed = r.Uint("seed", config.seed);
    config.out_dir = r.String("out", "");
    r.Finish();
  } else {
    Require(scenario.has_value(), "config needs an [experiment] block");
    config.scenario = *scenario;
  }

  auto read = [&tree](const char* name, auto reader, auto* target) {
    const auto child = tree.get_child_optional(name);
    if (!child) return;
    SectionReader r(*child, name);
    *target = reader(r);
    r.Finish();
  };
  read("plant", ReadPlant, &config.plant);
  read("controller", ReadController, &config.controller);
  read("identify", ReadIdentify, &config.identify);
  read("generator", ReadGenerator, &config.generator);
  read("decouple", ReadDecouple, &config.decouple);
  read("compare", ReadCompare, &config.compare);
  read("contact", ReadContact, &config.contact);
  read("bench", ReadBench, &config.bench);
  return config;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path,
                            std::optional<Scenario> scenario) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return ParseConfig(in, path.parent_path(), scenario);
}

const std::string& ResultBundle::File(const std::string& name) const {
  for (const auto& f : files) {
    if (f.first == name) return f.second;
  }
  throw Error("result bundle has no file '" + name + "'");
}

std::string ResultBundle::SummaryText() const { return summary.dump(2) + "\n"; }

void WriteBundle(const ResultBundle& bundle,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error("cannot create output directory '" + dir.string() +
                "': " + ec.message());
  }
  auto write = [&dir](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
  };
  for (const auto& [name, text] : bundle.files) write(name, text);
  write("summary.json", bundle.SummaryText());
  if (!bundle.timing.is_null()) write("timing.json", bundle.timing.dump(2) + "\n");
}

std::string Sha256Hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < length; ++i) {
    os << std::setw(2) << static_cast<int>(digest[i]);
  }
  return os.str();
}

double Rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("rmse inputs differ in length");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum / a.size());
}

// ---------------------------------------------------------------------------
// identify

ResultBundle RunIdentify(const ExperimentConfig& config) {
  const PlantSection& plant = *config.plant;
  const IdentifySection& id = *config.identify;
  ResultBundle bundle = NewBundle(config);
  const bool synthetic = id.slow.empty();

  std::vector<Trajectory> slow, transient, test;
  if (synthetic) {
    const GeneratorSection& g = *config.generator;
    std::uint64_t stream = 0;
    for (double level : g.ramp_levels) {
      const ExcitationProfile profile =
          RampProfile(plant.map.CommandFor(level), g.ramp_strain_lo,
                      g.ramp_strain_hi, g.ramp_strain_rate, g.rate);
      slow.push_back(SynthesizeTrajectory(plant.muscle, plant.map, profile,
                                          g.noise_std,
                                          SubSeed(config.seed, stream++)));
    }
    for (int i = 0; i < g.transient_trials; ++i) {
      const ExcitationProfile profile = TransientProfile(
          g.transient_duration, 0.0, g.transient_amplitude,
          plant.map.max_command, SubSeed(config.seed, 1000 + i), g.rate);
      transient.push_back(SynthesizeTrajectory(
          plant.muscle, plant.map, profile, g.noise_std,
          SubSeed(config.seed, stream++)));
    }
  } else {
    slow = LoadAll(id.slow, config.base_dir);
    transient = LoadAll(id.transient, config.base_dir);
    test = LoadAll(id.test, config.base_dir);
  }
  if (test.empty()) {
    const size_t n = transient.size();
    if (n < 2) throw ConfigError("identify needs >= 2 transient trials");
    const size_t held = std::clamp<size_t>(
        static_cast<size_t>(std::llround(id.test_fraction * n)), 1, n - 1);
    test.assign(transient.end() - held, transient.end());
    transient.resize(n - held);
  }

  IdentificationOptions options;
  options.map = plant.map;
  options.starts = id.starts;
  options.seed = config.seed;
  options.joint_refinement = id.joint_refinement;
  const IdentificationResult result = Identify(slow, transient, options);
  const MuscleModel& model = result.model;

  // Held-out forward simulation.
  Rows residual_rows;
  std::vector<double> predicted, measured;
  for (size_t k = 0; k < test.size(); ++k) {
    const std::vector<double> f =
        SimulateForce(model, plant.map, ProfileOf(test[k]), 1);
    for (size_t i = 0; i < f.size(); ++i) {
      const TrajectorySample& s = test[k].samples[i];
      residual_rows.push_back({static_cast<double>(k), s.t, s.u, s.eps, s.F,
                               f[i], f[i] - s.F});
      predicted.push_back(f[i]);
      measured.push_back(s.F);
    }
  }
  const FitReport report = ScorePredictions(predicted, measured);
  const ConstraintReport constraints =
      ValidateShapeConstraints(model.coeffs, id.interval);

  // Parameters.
  const std::vector<std::pair<std::string, double>> fitted = {
      {"c0", model.coeffs.c0},         {"c1", model.coeffs.c1},
      {"c2", model.coeffs.c2},         {"d1", model.coeffs.d1},
      {"k_s", model.dynamics.k_s},     {"eta", model.dynamics.eta},
      {"tau_a", model.dynamics.tau_a}};
  const std::vector<double> reference = {
      plant.muscle.coeffs.c0,     plant.muscle.coeffs.c1,
      plant.muscle.coeffs.c2,     plant.muscle.coeffs.d1,
      plant.muscle.dynamics.k_s,  plant.muscle.dynamics.eta,
      plant.muscle.dynamics.tau_a};
  std::ostringstream params;
  params << (synthetic ? "parameter,fitted,reference,relative_error\n"
                       : "parameter,fitted\n");
  Json& metrics = bundle.summary["metrics"];
  double pade_error = 0.0, dynamics_error = 0.0;
  for (size_t i = 0; i < fitted.size(); ++i) {
    params << fitted[i].first << ',' << Fmt(fitted[i].second);
    metrics["fitted"][fitted[i].first] = fitted[i].second;
    if (synthetic) {
      const double err = RelativeError(fitted[i].second, reference[i]);
      params << ',' << Fmt(reference[i]) << ',' << Fmt(err);
      metrics["relative_error"][fitted[i].first] = err;
      (i < 4 ? pade_error : dynamics_error) =
          std::max(i < 4 ? pade_error : dynamics_error, err);
    }
    params << '\n';
  }

  std::ostringstream trace;
  trace << "stage,iteration,objective\n";
  auto add_trace = [&trace](const std::string& stage,
                            const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i) {
      trace << stage << ',' << i << ',' << Fmt(values[i]) << '\n';
    }
  };
  add_trace("quasi_static_initial", result.quasi_static_initial.trace);
  add_trace("dynamics_initial", result.dynamics_initial.trace);
  add_trace("quasi_static", result.quasi_static.trace);
  add_trace("dynamics", result.dynamics.trace);
  add_trace("joint", result.joint_trace);

  metrics["test_rmse"] = report.rmse;
  metrics["test_r_squared"] = report.r_squared;
  metrics["test_samples"] = predicted.size();
  metrics["train_trials"] = transient.size();
  metrics["test_trials"] = test.size();
  metrics["constraints_passed"] = constraints.AllPassed();
  metrics["max_contraction"] = constraints.max_contraction;
  metrics["dynamics_condition_number"] = result.dynamics.condition_number;
  metrics["dynamics_ill_conditioned"] = result.dynamics.ill_conditioned;

  Json& checks = bundle.summary["checks"];
  checks.push_back(Check("shape_constraints", constraints.AllPassed() ? 1 : 0,
                         "all pass", constraints.AllPassed()));
  if (synthetic) {
    const double noise = config.generator->noise_std;
    const double pade_tol = noise == 0.0 ? 0.01 : 0.10;
    const double dyn_tol = noise == 0.0 ? 0.05 : 0.20;
    checks.push_back(Check("pade_max_relative_error", pade_error,
                           "<= " + Fmt(pade_tol), pade_error <= pade_tol));
    checks.push_back(Check("dynamics_max_relative_error", dynamics_error,
                           "<= " + Fmt(dyn_tol), dynamics_error <= dyn_tol));
    if (noise == 0.0) {
      checks.push_back(Check("test_r_squared", report.r_squared, "> 0.999",
                             report.r_squared > 0.999));
    } else {
      const double lo = noise * 0.25 / 0.3, hi = noise * 0.40 / 0.3;
      checks.push_back(Check(
          "test_rmse", report.rmse, "[" + Fmt(lo) + ", " + Fmt(hi) + "]",
          report.rmse >= lo && report.rmse <= hi));
    }
  }

  bundle.files.emplace_back("params.csv", params.str());
  bundle.files.emplace_back(
      "residuals.csv",
      NumericTable({"trial", "t", "u", "eps", "measured", "predicted",
                    "residual"},
                   residual_rows));
  bundle.files.emplace_back("trace.csv", trace.str());
  if (synthetic) {
    for (size_t i = 0; i < slow.size(); ++i) {
      bundle.files.emplace_back("slow_" + std::to_string(i) + ".csv",
                                TrajectoryText(slow[i]));
    }
    for (size_t i = 0; i < transient.size(); ++i) {
      bundle.files.emplace_back("transient_" + std::to_string(i) + ".csv",
                                TrajectoryText(transient[i]));
    }
    for (size_t i = 0; i < test.size(); ++i) {
      bundle.files.emplace_back("test_" + std::to_string(i) + ".csv",
                                TrajectoryText(test[i]));
    }
  }
  FinishBundle(&bundle);
  return bundle;
}

// ---------------------------------------------------------------------------
// decouple-map

ResultBundle RunDecoupleMap(const ExperimentConfig& config) {
  const PlantSection& p = *config.plant;
  const DecoupleSection& d = *config.decouple;
  const JointPlant plant(p.joint, p.ScaledMuscle());
  ResultBundle bundle = NewBundle(config);
  const std::vector<std::string> header = {"c", "b", "alpha1", "alpha2", "T",
                                           "K"};

  auto point = [&](double c, double b) {
    const ActivationPair alpha = FromCoContractionBias({c, b});
    const auto [T, K] = TorqueStiffness(plant, d.theta, alpha, p.dt);
    return std::vector<double>{c, b, alpha.alpha1, alpha.alpha2, T, K};
  };
  auto lerp = [](double lo, double hi, int i, int n) {
    return lo + (hi - lo) * i / (n - 1);
  };
  auto b_limit = [](double c) { return std::min(c, 1.0 - c); };

  Rows b0, c_fixed, grid, boundary;
  for (int i = 0; i < d.c_points; ++i) {
    b0.push_back(point(lerp(d.c_min, d.c_max, i, d.c_points), 0.0));
  }
  const double b_max = b_limit(d.fixed_c);
  for (int j = 0; j < d.b_points; ++j) {
    c_fixed.push_back(point(d.fixed_c, lerp(-b_max, b_max, j, d.b_points)));
  }
  for (int i = 0; i < d.c_points; ++i) {
    const double c = lerp(d.c_min, d.c_max, i, d.c_points);
    for (int j = 0; j < d.b_points; ++j) {
      grid.push_back(point(c, lerp(-b_limit(c), b_limit(c), j, d.b_points)));
    }
  }
  // Edges of the activation box, traced counter-clockwise in alpha space.
  const int edge_points = 101;
  const std::array<std::array<double, 4>, 4> edges = {{{0, 0, 1, 0},
                                                       {1, 0, 1, 1},
                                                       {1, 1, 0, 1},
                                                       {0, 1, 0, 0}}};
  for (const auto& e : edges) {
    for (int k = 0; k + 1 < edge_points; ++k) {
      const double s = static_cast<double>(k) / (edge_points - 1);
      const ActivationPair alpha = {e[0] + (e[2] - e[0]) * s,
                                    e[1] + (e[3] - e[1]) * s};
      const CoContractionBias cb = ToCoContractionBias(alpha);
      const auto [T, K] = TorqueStiffness(plant, d.theta, alpha, p.dt);
      boundary.push_back({cb.c, cb.b, alpha.alpha1, alpha.alpha2, T, K});
    }
  }

  double max_abs_T = 0.0, K_min = INFINITY, K_max = -INFINITY;
  for (const auto& row : b0) {
    max_abs_T = std::max(max_abs_T, std::abs(row[4]));
    K_min = std::min(K_min, row[5]);
    K_max = std::max(K_max, row[5]);
  }
  const double K_ratio = K_max / K_min;
  bool monotone = true;
  for (size_t j = 1; j < c_fixed.size(); ++j) {
    monotone = monotone && c_fixed[j][4] > c_fixed[j - 1][4];
  }
  const bool crosses =
      c_fixed.front()[4] < 0.0 && c_fixed.back()[4] > 0.0;

  Json& m = bundle.summary["metrics"];
  m["b0_max_abs_torque"] = max_abs_T;
  m["b0_K_min"] = K_min;
  m["b0_K_max"] = K_max;
  m["b0_K_ratio"] = K_ratio;
  m["bias_sweep_monotone"] = monotone;
  m["bias_sweep_crosses_zero"] = crosses;
  m["bias_sweep_T_min"] = c_fixed.front()[4];
  m["bias_sweep_T_max"] = c_fixed.back()[4];
  Json& checks = bundle.summary["checks"];
  checks.push_back(
      Check("b0_max_abs_torque", max_abs_T, "<= 1e-9", max_abs_T <= 1e-9));
  checks.push_back(Check("b0_K_ratio", K_ratio, ">= 1.5", K_ratio >= 1.5));
  checks.push_back(Check("bias_sweep_monotone", monotone ? 1 : 0,
                         "strictly increasing", monotone));
  checks.push_back(
      Check("bias_sweep_crosses_zero", crosses ? 1 : 0, "sign change", crosses));

  bundle.files.emplace_back("sweep_b0.csv", NumericTable(header, b0));
  bundle.files.emplace_back("sweep_c_fixed.csv", NumericTable(header, c_fixed));
  bundle.files.emplace_back("grid.csv", NumericTable(header, grid));
  bundle.files.emplace_back("boundary.csv", NumericTable(header, boundary));
  FinishBundle(&bundle);
  return bundle;
}

// ---------------------------------------------------------------------------
// controller-compare

CompareRun RunCompareTrial(const PlantSection& p,
                           const ControllerSection& controller_section,
                           const CompareSection& c, double amplitude,
                           bool feedback) {
  const JointPlant plant(p.joint, p.ScaledMuscle());
  ControllerConfig cfg = controller_section.ToConfig(p);
  cfg.feedback = feedback;
  Controller controller(plant, cfg);

  auto targets = [&c](double t) {
    ControlTargets x;
    x.T_des = c.T_step * (SmoothStep(t, c.T_up, c.transition) -
                          SmoothStep(t, c.T_down, c.transition));
    x.K_des = c.K_base + c.K_step * (SmoothStep(t, c.K_up, c.transition) -
                                     SmoothStep(t, c.K_down, c.transition));
    return x;
  };
  auto disturbance = [&](double t) {
    double sign = 1.0;
    for (double start : c.pulse_starts) {
      if (t >= start && t < start + c.pulse_width) return sign * amplitude;
      sign = -sign;
    }
    return 0.0;
  };

  const double theta = 0.0;
  const InnerSolution init =
      InnerSolve(plant, targets(0.0), plant.RestState(theta, {}), {0.5, 0.5},
                 p.dt, cfg.solver);
  const ActivationPair alpha0 =
      cfg.preload ? plant.ApplyPreload(theta, init.alpha) : init.alpha;
  JointState state = plant.RestState(theta, alpha0);
  controller.Reset(alpha0);

  CompareRun run;
  run.amplitude = amplitude;
  run.feedback = feedback;
  const int steps = static_cast<int>(std::llround(c.duration / p.dt));
  run.log.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    const double t = k * p.dt;
    ControlReferences refs;
    refs.targets = targets(t);
    const double tau_d = disturbance(t);
    const double T_meas = plant.Torque(state) + tau_d;
    const ControlOutput out = controller.Tick(refs, state, p.dt, T_meas);
    run.log.push_back({t, refs.targets.T_des, refs.targets.K_des, T_meas,
                       out.diagnostics.K_est, tau_d, out.alpha.alpha1,
                       out.alpha.alpha2});
    state = plant.StepLocked(state, out.alpha, p.dt);
  }
  run.rmse_T = Rmse(Column(run.log, 3), Column(run.log, 1));
  run.rmse_K = Rmse(Column(run.log, 4), Column(run.log, 2));
  return run;
}

ResultBundle RunControllerCompare(const ExperimentConfig& config) {
  const CompareSection& c = *config.compare;
  ResultBundle bundle = NewBundle(config);
  const std::vector<std::string> header = {"t",     "T_des", "K_des",
                                           "T_meas", "K_est", "tau_d",
                                           "alpha1", "alpha2"};
  Rows table;
  Json rows = Json::array();
  Json& checks = bundle.summary["checks"];
  for (double amplitude : c.amplitudes) {
    const CompareRun open = RunCompareTrial(*config.plant, *config.controller,
                                            c, amplitude, false);
    const CompareRun closed = RunCompareTrial(
        *config.plant, *config.controller, c, amplitude, true);
    const std::string tag = Fmt(amplitude);
    bundle.files.emplace_back("compare_open_" + tag + ".csv",
                              NumericTable(header, open.log));
    bundle.files.emplace_back("compare_closed_" + tag + ".csv",
                              NumericTable(header, closed.log));
    const double factor = open.rmse_T / closed.rmse_T;
    table.push_back({amplitude, open.rmse_T, closed.rmse_T, open.rmse_K,
                     closed.rmse_K, factor});
    rows.push_back({{"amplitude", amplitude},
                    {"rmse_T_open", open.rmse_T},
                    {"rmse_T_closed", closed.rmse_T},
                    {"rmse_K_open", open.rmse_K},
                    {"rmse_K_closed", closed.rmse_K},
                    {"improvement_T", factor}});
    if (amplitude == 0.0) {
      const double worst = std::max(open.rmse_T, closed.rmse_T);
      checks.push_back(Check("nominal_rmse_T", worst, "<= 0.01",
                             worst <= 0.01));
    }
    if (amplitude >= 1.0) {
      checks.push_back(Check("closed_below_open_at_" + tag, factor, "> 1",
                             closed.rmse_T < open.rmse_T));
    }
    if (amplitude == 1.0) {
      checks.push_back(
          Check("improvement_at_1", factor, ">= 5", factor >= 5.0));
    }
  }
  bundle.summary["metrics"]["runs"] = rows;
  bundle.files.emplace_back(
      "rmse.csv", NumericTable({"amplitude", "rmse_T_open", "rmse_T_closed",
                                "rmse_K_open", "rmse_K_closed",
                                "improvement_T"},
                               table));
  FinishBundle(&bundle);
  return bundle;
}

// ---------------------------------------------------------------------------
// contact

ResultBundle RunContactMatrix(const ExperimentConfig& config) {
  const PlantSection& p = *config.plant;
  const ContactSection& c = *config.contact;
  ResultBundle bundle = NewBundle(config);

  ContactTrialConfig trial;
  trial.joint = p.joint;
  trial.muscle = p.ScaledMuscle();
  trial.controller = config.controller->ToConfig(p);
  trial.law = c.law;
  trial.D_imp = c.D_imp;
  trial.dt = p.dt;
  trial.horizon = c.horizon;
  trial.approach_velocity = c.approach_velocity;
  trial.start_offset = c.start_offset;

  const std::vector<std::pair<std::string, Surface>> surfaces = {
      {"soft", c.soft}, {"rigid", c.rigid}};
  StiffnessPolicy adaptive =
      StiffnessPolicy::DepthAdaptive(c.K_low, c.K_high, c.alpha_d);
  adaptive.increasing = c.adaptive_increasing;
  const std::vector<StiffnessPolicy> policies = {
      adaptive,
      StiffnessPolicy::FixedLow(c.K_low), StiffnessPolicy::FixedHigh(c.K_high)};

  std::ostringstream table;
  table << "surface,policy,peak,impulse,t90,tau_exp,stability,theta_ss,"
           "aborted\n";
  std::map<std::string, ContactMetrics> results;
  Json trials = Json::array();
  for (const auto& [surface_name, surface] : surfaces) {
    for (const StiffnessPolicy& policy : policies) {
      const std::string policy_name = PolicyName(policy.kind);
      const TrialLog log = RunContactTrial(policy, surface, trial);
      std::ostringstream log_text;
      WriteTrialLogCsv(log_text, log);
      bundle.files.emplace_back(
          "contact_" + surface_name + "_" + policy_name + ".csv",
          log_text.str());

      MetricsConfig mc = c.metrics;
      mc.theta_contact = surface.theta_contact;
      Json entry = {{"surface", surface_name},
                    {"policy", policy_name},
                    {"aborted", log.aborted}};
      if (log.aborted) entry["error"] = log.error;
      try {
        const ContactMetrics m = ComputeMetrics(log, mc);
        results[surface_name + "/" + policy_name] = m;
        entry["peak"] = m.peak;
        entry["impulse"] = m.impulse;
        entry["t90"] = m.t90;
        entry["tau_exp"] = m.tau_exp;
        entry["stability"] = m.stability;
        entry["theta_ss"] = m.theta_ss;
        table << surface_name << ',' << policy_name << ',' << Fmt(m.peak)
              << ',' << Fmt(m.impulse) << ',' << Fmt(m.t90) << ','
              << Fmt(m.tau_exp) << ',' << Fmt(m.stability) << ','
              << Fmt(m.theta_ss) << ',' << (log.aborted ? 1 : 0) << '\n';
      } catch (const Error& e) {
        entry["metrics_error"] = e.what();
      }
      trials.push_back(entry);
    }
  }
  bundle.summary["metrics"]["trials"] = trials;

  Json& checks = bundle.summary["checks"];
  auto get = [&results](const std::string& key) -> const ContactMetrics* {
    const auto it = results.find(key);
    return it == results.end() ? nullptr : &it->second;
  };
  const ContactMetrics* sb = get("soft/bio");
  const ContactMetrics* sl = get("soft/fixed_low");
  const ContactMetrics* sh = get("soft/fixed_high");
  const ContactMetrics* rb = get("rigid/bio");
  const ContactMetrics* rl = get("rigid/fixed_low");
  const ContactMetrics* rh = get("rigid/fixed_high");
  if (sb && sl && sh) {
    checks.push_back(Check("soft_stability_bio", sb->stability, "== 100",
                           sb->stability == 100.0));
    checks.push_back(Check("soft_stability_fixed_high", sh->stability, "< 60",
                           sh->stability < 60.0));
    checks.push_back(Check("soft_stability_order", sb->stability - sl->stability,
                           "bio > fixed_low > fixed_high",
                           sb->stability > sl->stability &&
                               sl->stability > sh->stability));
    const double ratio = sb->t90 / sl->t90;
    checks.push_back(Check("soft_t90_ratio_bio_low", ratio, "<= 0.1",
                           ratio <= 0.1));
  }
  if (rb && rl && rh) {
    checks.push_back(Check("rigid_impulse_order", rb->impulse - rl->impulse,
                           "bio < fixed_low < fixed_high",
                           rb->impulse < rl->impulse &&
                               rl->impulse < rh->impulse));
    const double ratio = rb->impulse / rh->impulse;
    checks.push_back(
        Check("rigid_impulse_ratio_bio_high", ratio, "<= 0.5", ratio <= 0.5));
    for (const auto& [name, m] :
         {std::pair{"bio", rb}, {"fixed_low", rl}, {"fixed_high", rh}}) {
      checks.push_back(Check(std::string("rigid_theta_ss_") + name,
                             m->theta_ss, "[0.19, 0.24]",
                             m->theta_ss >= 0.19 && m->theta_ss <= 0.24));
    }
  }
  bundle.files.emplace_back("contact_metrics.csv", table.str());
  FinishBundle(&bundle);
  return bundle;
}

// ---------------------------------------------------------------------------
// bench

namespace {

struct TickTiming {
  std::vector<double> seconds;  // per tick
  double elapsed = 0.0;         // around the whole loop
  std::vector<int> iterations;
};

Json Stats(const TickTiming& timing) {
  std::vector<double> s = timing.seconds;
  std::sort(s.begin(), s.end());
  double sum = 0.0;
  for (double v : s) sum += v;
  const size_t n = s.size();
  const double median =
      n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  const size_t p99 = std::min(n - 1, static_cast<size_t>(std::ceil(0.99 * n)) - 1);
  return {{"ticks", n},
          {"mean_us", 1e6 * sum / n},
          {"median_us", 1e6 * median},
          {"p99_us", 1e6 * s[p99]},
          {"max_us", 1e6 * s.back()},
          {"sum_s", sum},
          {"elapsed_s", timing.elapsed}};
}

}  // namespace

ResultBundle RunBench(const ExperimentConfig& config) {
  const PlantSection& p = *config.plant;
  const BenchSection& b = *config.bench;
  const JointPlant plant(p.joint, p.ScaledMuscle());
  const ControllerConfig cfg = config.controller->ToConfig(p);
  ResultBundle bundle = NewBundle(config);

  auto references = [&b](double t) {
    const double phase = 2.0 * std::numbers::pi * t / b.period;
    ControlReferences refs;
    refs.targets.T_des = b.T_amplitude * std::sin(phase);
    refs.targets.K_des = b.K_mean + b.K_amplitude * std::cos(phase);
    return refs;
  };
  const double theta = 0.0;
  const InnerSolution init =
      InnerSolve(plant, references(0.0).targets, plant.RestState(theta, {}),
                 {0.5, 0.5}, p.dt, cfg.solver);
  const ActivationPair alpha0 =
      cfg.preload ? plant.ApplyPreload(theta, init.alpha) : init.alpha;

  // Closed-loop run on the locked joint records the measured states; the
  // timed passes replay those states and precomputed references.
  std::vector<JointState> states;
  std::vector<ControlReferences> refs;
  states.reserve(b.ticks);
  refs.reserve(b.ticks);
  {
    Controller controller(plant, cfg);
    controller.Reset(alpha0);
    JointState state = plant.RestState(theta, alpha0);
    for (int k = 0; k < b.ticks; ++k) {
      states.push_back(state);
      refs.push_back(references(k * p.dt));
      const ControlOutput out = controller.Tick(refs.back(), state, p.dt);
      state = plant.StepLocked(state, out.alpha, p.dt);
    }
  }

  using Clock = std::chrono::steady_clock;
  auto replay = [&](bool warm) {
    Controller controller(plant, cfg);
    controller.Reset(alpha0);
    controller.set_warm_start_enabled(warm);
    TickTiming timing;
    timing.seconds.resize(states.size());
    timing.iterations.resize(states.size());
    // Each tick runs from the previous clock read to its own, so the loop
    // overhead is charged to the ticks and no time goes unaccounted.
    const auto start = Clock::now();
    auto previous = start;
    for (size_t k = 0; k < states.size(); ++k) {
      const ControlOutput out = controller.Tick(refs[k], states[k], p.dt);
      const auto now = Clock::now();
      timing.seconds[k] = std::chrono::duration<double>(now - previous).count();
      timing.iterations[k] = out.diagnostics.iterations;
      previous = now;
    }
    timing.elapsed = std::chrono::duration<double>(previous - start).count();
    return timing;
  };
  const TickTiming warm = replay(true);
  const TickTiming cold = replay(false);

  // Deterministic part: Newton iteration histograms.
  int max_iter = 0;
  for (int i : warm.iterations) max_iter = std::max(max_iter, i);
  for (int i : cold.iterations) max_iter = std::max(max_iter, i);
  Rows histogram(max_iter + 1, std::vector<double>(3, 0.0));
  for (int i = 0; i <= max_iter; ++i) histogram[i][0] = i;
  double warm_mean = 0.0, cold_mean = 0.0;
  for (int i : warm.iterations) {
    histogram[i][1] += 1;
    warm_mean += i;
  }
  for (int i : cold.iterations) {
    histogram[i][2] += 1;
    cold_mean += i;
  }
  warm_mean /= b.ticks;
  cold_mean /= b.ticks;
  Json& m = bundle.summary["metrics"];
  m["ticks"] = b.ticks;
  m["warm_mean_iterations"] = warm_mean;
  m["cold_mean_iterations"] = cold_mean;
  bundle.files.emplace_back(
      "iterations.csv",
      NumericTable({"iterations", "warm_ticks", "cold_ticks"}, histogram));
  bundle.summary["checks"].push_back(
      Check("warm_iterations_not_above_cold", warm_mean - cold_mean, "<= 0",
            warm_mean <= cold_mean));

  // Wall-clock part.
  const Json ws = Stats(warm), cs = Stats(cold);
  const double warm_median = ws["median_us"].get<double>();
  const double accounting =
      std::abs(warm.elapsed - ws["sum_s"].get<double>()) / warm.elapsed;
  bundle.timing = {{"warm", ws}, {"cold", cs}};
  bundle.timing["checks"] = Json::array(
      {Check("warm_median_us", warm_median, "< 1000", warm_median < 1000.0),
       Check("warm_median_not_above_cold", warm_median,
             "<= " + Fmt(cs["median_us"].get<double>()),
             warm_median <= cs["median_us"].get<double>()),
       Check("timer_accounting", accounting, "<= 0.05", accounting <= 0.05)});
  FinishBundle(&bundle);
  return bundle;
}

ResultBundle RunScenario(const ExperimentConfig& config) {
  config.Validate();
  switch (config.scenario) {
    case Scenario::kIdentify:
      return RunIdentify(config);
    case Scenario::kDecoupleMap:
      return RunDecoupleMap(config);
    case Scenario::kControllerCompare:
      return RunControllerCompare(config);
    case Scenario::kContact:
      return RunContactMatrix(config);
    case Scenario::kBench:
      return RunBench(config);
  }
  throw ConfigError("unhandled scenario");
}

}  // namespace softjoint
