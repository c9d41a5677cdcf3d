#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcm/coupling.hpp"
#include "mrcm/perm.hpp"

namespace mrcm {

/// One well line from a config: cell (i, j) and a signed volume rate.
struct WellConfigEntry {
  int i = 0, j = 0;
  double rate = 0.0;
};

/// Parsed key-value run configuration.  Every recognized key has a default;
/// unknown keys are rejected at parse time.
struct RunConfig {
  // Grid and domain.
  int nx = 0, ny = 0;
  double lx = 1.0, ly = 1.0;

  // Permeability source: "uniform:VALUE" | "gaussian:SEED[:SCALE]" |
  // "file:PATH" (field format) | "ascii:PATH:NX:NY[:LAYER]" (raw layers).
  std::string perm = "uniform:1";
  std::vector<ChannelRegion> channels;  // repeated `channel = ...` lines

  // Decomposition and interface spaces (MRCM backend).
  int mx = 1, my = 1;
  std::string space = "p1";  // p0 | p1 | physics | full
  double alpha = 1.0;
  bool alpha_adaptive = false;
  double alpha_low = 1e-2, alpha_high = 1e2;
  double hi_factor = 10.0, lo_factor = 10.0;

  // Fluids.
  double mu_w = 1.0, mu_o = 1.0, rho_w = 1.0, rho_o = 1.0;

  // Gravity.
  bool gravity = false;
  double g = 0.0;
  int grad_h_sign = -1;

  // Boundary preset: "slab" (inflow left, outflow right, closed top/bottom)
  // | "closed" | "slab_dirichlet" (p=1 left, p=0 right).
  std::string bc = "slab";
  double inflow = 1.0;  // left-edge inflow velocity for the slab preset
  double inlet_sat = 1.0;
  std::vector<WellConfigEntry> wells;  // repeated `well = i j rate` lines

  // Initial condition: "uniform:VALUE" |
  // "strip:WIDTH_CELLS:BUMP_DEPTH:BUMP_HALFWIDTH" (fingering front).
  std::string init = "uniform:0";

  // Time stepping: dt in PVI, or a CFL multiple when dt_cfl is set.
  double dt = 0.0;
  double dt_cfl = 0.0;  // > 0 means dt = dt_cfl * dt_CFL
  double T = 0.0;
  std::string scheme = "si";       // si | sfi
  std::string backend = "fine";    // fine | mrcm
  std::string strategy = "inflection";
  double eta = 1e-6;
  int max_iterations = 100;
  double outer_tol = 1e-4;
  int outer_cap = 50;

  unsigned long seed = 1234;
  std::string out_dir = ".";
  std::vector<double> snapshot_times;  // repeated `snapshot = T` lines
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <typename T>
inline T parse_value(const std::string& v, const std::string& key, int line) {
  std::istringstream in(v);
  T out;
  if (!(in >> out) || !(in >> std::ws).eof())
    throw std::runtime_error("config line " + std::to_string(line) +
                             ": bad value for key '" + key + "': " + v);
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key, int line) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::runtime_error("config line " + std::to_string(line) +
                           ": bad boolean for key '" + key + "': " + v);
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  static const std::set<std::string> kOneOf = {
      "si", "sfi", "fine", "mrcm", "p0", "p1", "physics", "full",
      "plain", "under_relax", "inflection", "dogleg", "reflective",
      "slab", "slab_dirichlet", "closed"};
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    const bool repeatable = key == "channel" || key == "well" ||
                            key == "snapshot";
    if (!repeatable && !seen.insert(key).second)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": duplicate key '" + key + "'");

    auto num = [&](auto& field) {
      field = detail::parse_value<std::decay_t<decltype(field)>>(val, key,
                                                                 lineno);
    };
    auto word = [&](std::string& field) {
      if (!kOneOf.count(val))
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": unknown value '" + val + "' for key '" +
                                 key + "'");
      field = val;
    };

    if (key == "nx") num(cfg.nx);
    else if (key == "ny") num(cfg.ny);
    else if (key == "lx") num(cfg.lx);
    else if (key == "ly") num(cfg.ly);
    else if (key == "perm") cfg.perm = val;
    else if (key == "channel") {
      std::istringstream cs(val);
      ChannelRegion r{};
      if (!(cs >> r.x_lo >> r.x_hi >> r.y_lo >> r.y_hi >> r.factor))
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": channel needs x_lo x_hi y_lo y_hi factor");
      cfg.channels.push_back(r);
    } else if (key == "mx") num(cfg.mx);
    else if (key == "my") num(cfg.my);
    else if (key == "space") word(cfg.space);
    else if (key == "alpha") {
      if (val.rfind("adaptive:", 0) == 0) {
        std::string rest = val.substr(9);
        for (auto& ch : rest)
          if (ch == ':') ch = ' ';
        std::istringstream as(rest);
        if (!(as >> cfg.alpha_low >> cfg.alpha_high))
          throw std::runtime_error("config line " + std::to_string(lineno) +
                                   ": alpha = adaptive:LOW:HIGH");
        cfg.alpha_adaptive = true;
      } else {
        num(cfg.alpha);
      }
    } else if (key == "hi_factor") num(cfg.hi_factor);
    else if (key == "lo_factor") num(cfg.lo_factor);
    else if (key == "mu_w") num(cfg.mu_w);
    else if (key == "mu_o") num(cfg.mu_o);
    else if (key == "rho_w") num(cfg.rho_w);
    else if (key == "rho_o") num(cfg.rho_o);
    else if (key == "gravity") cfg.gravity = detail::parse_bool(val, key, lineno);
    else if (key == "g") num(cfg.g);
    else if (key == "grad_h_sign") num(cfg.grad_h_sign);
    else if (key == "bc") word(cfg.bc);
    else if (key == "inflow") num(cfg.inflow);
    else if (key == "inlet_sat") num(cfg.inlet_sat);
    else if (key == "well") {
      std::istringstream ws(val);
      WellConfigEntry w;
      if (!(ws >> w.i >> w.j >> w.rate))
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": well needs i j rate");
      cfg.wells.push_back(w);
    } else if (key == "init") cfg.init = val;
    else if (key == "dt") num(cfg.dt);
    else if (key == "dt_cfl") num(cfg.dt_cfl);
    else if (key == "T") num(cfg.T);
    else if (key == "scheme") word(cfg.scheme);
    else if (key == "backend") word(cfg.backend);
    else if (key == "strategy") word(cfg.strategy);
    else if (key == "eta") num(cfg.eta);
    else if (key == "max_iterations") num(cfg.max_iterations);
    else if (key == "outer_tol") num(cfg.outer_tol);
    else if (key == "outer_cap") num(cfg.outer_cap);
    else if (key == "seed") num(cfg.seed);
    else if (key == "out") cfg.out_dir = val;
    else if (key == "snapshot") {
      cfg.snapshot_times.push_back(
          detail::parse_value<double>(val, key, lineno));
    } else {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": unknown key '" + key + "'");
    }
  }
  if (cfg.nx < 1 || cfg.ny < 1)
    throw std::runtime_error("config: nx and ny are required and must be >= 1");
  if (!(cfg.T > 0.0))
    throw std::runtime_error("config: T is required and must be > 0");
  if (!(cfg.dt > 0.0) && !(cfg.dt_cfl > 0.0))
    throw std::runtime_error("config: one of dt or dt_cfl must be > 0");
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_run_config(in);
}

inline NewtonStrategy strategy_from_name(const std::string& name) {
  if (name == "plain") return NewtonStrategy::Plain;
  if (name == "under_relax") return NewtonStrategy::UnderRelax;
  if (name == "inflection") return NewtonStrategy::Inflection;
  if (name == "dogleg") return NewtonStrategy::Dogleg;
  if (name == "reflective") return NewtonStrategy::Reflective;
  throw std::invalid_argument("unknown Newton strategy: " + name);
}

}  // namespace mrcm
