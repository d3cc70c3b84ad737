#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "limbctl/limb_model.hpp"
#include "limbctl/state_space.hpp"
#include "limbctl/svd_controller.hpp"

namespace limbctl {

struct SimulationConfig {
  double dt = 1e-3;
  double duration = 20.0;
  std::string trajectory = "step";  // step | sequence | path to a waypoint file
  double amplitude_deg = 30.0;
  std::optional<double> lag_time_constant = 0.5;  // actuator lag surrogate [s]
  std::optional<unsigned> mismatch_seed;
  bool antiwindup = true;
  bool direction_scaling = true;
};

/// Fully resolved tool configuration. All angles cross the file boundary
/// in degrees and are stored internally in radians.
struct ToolConfig {
  LimbParams limb;
  PiGains controller;
  UncertaintyWeight uncertainty;
  SimulationConfig simulation;

  void validate() const {
    limb.validate();
    controller.validate();
    uncertainty.validate();
    if (!(simulation.dt > 0.0)) throw std::domain_error("simulation.dt must be positive");
    if (!(simulation.duration > simulation.dt))
      throw std::domain_error("simulation.duration must exceed simulation.dt");
    if (simulation.lag_time_constant && !(*simulation.lag_time_constant > 0.0))
      throw std::domain_error("simulation.lag_time_constant must be positive");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline double parse_number(const std::string& value, const std::string& field, int lineno) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(lineno) + ": field '" + field +
                             "' expects a number, got '" + value + "'");
  }
}

inline bool parse_bool(const std::string& value, const std::string& field, int lineno) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw std::runtime_error("line " + std::to_string(lineno) + ": field '" + field +
                           "' expects true/false, got '" + value + "'");
}

}  // namespace detail

/// Parses the flat sectioned key=value format. Unknown sections or keys
/// are rejected, '#' starts a comment, omitted keys keep their defaults,
/// and every value is validated against its owning type before returning.
inline ToolConfig parse_config_text(const std::string& text) {
  ToolConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "limb" && section != "controller" && section != "uncertainty" &&
          section != "simulation")
        throw std::runtime_error("line " + std::to_string(lineno) + ": unknown section [" +
                                 section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string qualified = section.empty() ? key : section + "." + key;

    auto num = [&]() { return detail::parse_number(value, qualified, lineno); };
    if (section == "limb") {
      if (key == "length_l") cfg.limb.length_L = num();
      else if (key == "cross_width_b") cfg.limb.cross_width_b = num();
      else if (key == "cross_height_h") cfg.limb.cross_height_h = num();
      else if (key == "moment_arm_dx") cfg.limb.moment_arm_dx = num();
      else if (key == "moment_arm_dy") cfg.limb.moment_arm_dy = num();
      else if (key == "sma_angle_phi_deg") cfg.limb.sma_angle_phi = num() * M_PI / 180.0;
      else if (key == "moduli") {
        cfg.limb.moduli.clear();
        std::istringstream items(value);
        std::string item;
        while (std::getline(items, item, ','))
          cfg.limb.moduli.push_back(detail::parse_number(detail::trim(item), qualified, lineno));
      } else
        throw std::runtime_error("line " + std::to_string(lineno) + ": unknown key '" +
                                 qualified + "'");
    } else if (section == "controller") {
      if (key == "kp") cfg.controller.kp = num();
      else if (key == "ki") cfg.controller.ki = num();
      else
        throw std::runtime_error("line " + std::to_string(lineno) + ": unknown key '" +
                                 qualified + "'");
    } else if (section == "uncertainty") {
      if (key == "r0") cfg.uncertainty.r0 = num();
      else if (key == "r_inf") cfg.uncertainty.r_inf = num();
      else if (key == "tau") cfg.uncertainty.tau = num();
      else
        throw std::runtime_error("line " + std::to_string(lineno) + ": unknown key '" +
                                 qualified + "'");
    } else if (section == "simulation") {
      if (key == "dt") cfg.simulation.dt = num();
      else if (key == "duration") cfg.simulation.duration = num();
      else if (key == "trajectory") cfg.simulation.trajectory = value;
      else if (key == "amplitude_deg") cfg.simulation.amplitude_deg = num();
      else if (key == "lag_time_constant")
        cfg.simulation.lag_time_constant =
            value == "none" ? std::nullopt : std::optional<double>(num());
      else if (key == "mismatch_seed")
        cfg.simulation.mismatch_seed =
            value == "none" ? std::nullopt
                            : std::optional<unsigned>(static_cast<unsigned>(num()));
      else if (key == "antiwindup") cfg.simulation.antiwindup = detail::parse_bool(value, qualified, lineno);
      else if (key == "direction_scaling")
        cfg.simulation.direction_scaling = detail::parse_bool(value, qualified, lineno);
      else
        throw std::runtime_error("line " + std::to_string(lineno) + ": unknown key '" +
                                 qualified + "'");
    } else {
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": key outside of any section: '" + key + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const std::domain_error& e) {
    throw std::runtime_error(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

inline ToolConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config file not readable: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

/// The resolved configuration in the same format the parser accepts, so
/// every report can state exactly which values (including defaults) it
/// ran with.
inline std::string format_config(const ToolConfig& cfg) {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  out << "[limb]\n";
  out << "length_l = " << num(cfg.limb.length_L) << "\n";
  out << "moduli = ";
  for (size_t i = 0; i < cfg.limb.moduli.size(); ++i)
    out << (i ? ", " : "") << num(cfg.limb.moduli[i]);
  out << "\n";
  out << "cross_width_b = " << num(cfg.limb.cross_width_b) << "\n";
  out << "cross_height_h = " << num(cfg.limb.cross_height_h) << "\n";
  out << "moment_arm_dx = " << num(cfg.limb.moment_arm_dx) << "\n";
  out << "moment_arm_dy = " << num(cfg.limb.moment_arm_dy) << "\n";
  out << "sma_angle_phi_deg = " << num(cfg.limb.sma_angle_phi * 180.0 / M_PI) << "\n";
  out << "[controller]\n";
  out << "kp = " << num(cfg.controller.kp) << "\n";
  out << "ki = " << num(cfg.controller.ki) << "\n";
  out << "[uncertainty]\n";
  out << "r0 = " << num(cfg.uncertainty.r0) << "\n";
  out << "r_inf = " << num(cfg.uncertainty.r_inf) << "\n";
  out << "tau = " << num(cfg.uncertainty.tau) << "\n";
  out << "[simulation]\n";
  out << "dt = " << num(cfg.simulation.dt) << "\n";
  out << "duration = " << num(cfg.simulation.duration) << "\n";
  out << "trajectory = " << cfg.simulation.trajectory << "\n";
  out << "amplitude_deg = " << num(cfg.simulation.amplitude_deg) << "\n";
  out << "lag_time_constant = "
      << (cfg.simulation.lag_time_constant ? num(*cfg.simulation.lag_time_constant)
                                           : std::string("none"))
      << "\n";
  out << "mismatch_seed = "
      << (cfg.simulation.mismatch_seed ? std::to_string(*cfg.simulation.mismatch_seed)
                                       : std::string("none"))
      << "\n";
  out << "antiwindup = " << (cfg.simulation.antiwindup ? "true" : "false") << "\n";
  out << "direction_scaling = " << (cfg.simulation.direction_scaling ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace limbctl
