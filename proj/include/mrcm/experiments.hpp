#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcm/config.hpp"
#include "mrcm/coupling.hpp"
#include "mrcm/field_io.hpp"
#include "mrcm/gaussian_field.hpp"
#include "mrcm/metrics.hpp"
#include "mrcm/perm.hpp"

namespace mrcm {

namespace detail {

inline std::vector<std::string> split_colon(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ':')) parts.push_back(cur);
  return parts;
}

}  // namespace detail

/// Builds the permeability field described by a config source string.
inline PermField build_perm(const RunConfig& cfg, const CartesianGrid& grid) {
  const auto parts = detail::split_colon(cfg.perm);
  PermField k;
  if (parts[0] == "uniform") {
    const double v = parts.size() > 1 ? std::stod(parts[1]) : 1.0;
    k = uniform_perm(grid, v);
  } else if (parts[0] == "gaussian") {
    const unsigned long seed =
        parts.size() > 1 ? std::stoul(parts[1]) : cfg.seed;
    const double scale = parts.size() > 2 ? std::stod(parts[2]) : 4.5;
    k = gen_gaussian_field(grid, seed, scale);
  } else if (parts[0] == "file") {
    if (parts.size() < 2)
      throw std::runtime_error("perm = file:PATH needs a path");
    CellField f = read_field(parts[1]);
    if (f.grid.nx != grid.nx || f.grid.ny != grid.ny)
      throw std::runtime_error("perm file grid does not match nx/ny");
    f.grid = grid;
    k = f;
  } else if (parts[0] == "ascii") {
    if (parts.size() < 4)
      throw std::runtime_error("perm = ascii:PATH:NX:NY[:LAYER]");
    const int fnx = std::stoi(parts[2]), fny = std::stoi(parts[3]);
    const int layer = parts.size() > 4 ? std::stoi(parts[4]) : 0;
    PermField raw = load_perm_ascii(parts[1], fnx, fny, layer);
    if (fnx != grid.nx || fny != grid.ny)
      throw std::runtime_error("ascii perm dims do not match nx/ny");
    raw.grid = grid;
    k = raw;
  } else {
    throw std::runtime_error("unknown permeability source: " + cfg.perm);
  }
  if (!cfg.channels.empty()) k = apply_channels(k, ChannelSpec{cfg.channels});
  validate_perm(k);
  return k;
}

/// Builds the initial saturation described by a config init string.
inline CellField build_initial_saturation(const RunConfig& cfg,
                                          const CartesianGrid& grid) {
  const auto parts = detail::split_colon(cfg.init);
  CellField s(grid);
  if (parts[0] == "uniform") {
    const double v = parts.size() > 1 ? std::stod(parts[1]) : 0.0;
    for (int c = 0; c < s.size(); ++c) s[c] = v;
  } else if (parts[0] == "strip") {
    // Water-filled strip at the left with a small bump at the vertical
    // center: strip:WIDTH_CELLS:BUMP_DEPTH_CELLS:BUMP_HALFWIDTH_CELLS.
    const int width = parts.size() > 1 ? std::stoi(parts[1]) : 2;
    const int depth = parts.size() > 2 ? std::stoi(parts[2]) : 1;
    const int halfw = parts.size() > 3 ? std::stoi(parts[3]) : 1;
    const int jc = grid.ny / 2;
    for (int j = 0; j < grid.ny; ++j) {
      const int w = std::abs(j - jc) <= halfw ? width + depth : width;
      for (int i = 0; i < grid.nx && i < w; ++i) s(i, j) = 1.0;
    }
  } else {
    throw std::runtime_error("unknown initial condition: " + cfg.init);
  }
  return s;
}

/// Assembles the full problem definition from a parsed config.
inline FlowProblem build_problem(const RunConfig& cfg) {
  FlowProblem prob;
  prob.grid = CartesianGrid(cfg.nx, cfg.ny, cfg.lx / cfg.nx, cfg.ly / cfg.ny);
  prob.K = build_perm(cfg, prob.grid);
  prob.props = FluidProps(cfg.mu_w, cfg.mu_o, cfg.rho_w, cfg.rho_o);
  prob.s0 = build_initial_saturation(cfg, prob.grid);
  prob.wells.inlet_sat = cfg.inlet_sat;
  for (const auto& w : cfg.wells)
    prob.wells.entries.push_back({prob.grid.cell(w.i, w.j), w.rate});

  prob.bc = BoundarySpec::no_flow(prob.grid);
  if (cfg.bc == "slab") {
    // Prescribed inflow on the left, fixed pressure on the right.
    prob.bc.set_side(Side::Left, BcType::Neumann, -cfg.inflow);
    prob.bc.set_side(Side::Right, BcType::Dirichlet, 0.0);
  } else if (cfg.bc == "slab_dirichlet") {
    prob.bc.set_side(Side::Left, BcType::Dirichlet, 1.0);
    prob.bc.set_side(Side::Right, BcType::Dirichlet, 0.0);
  }  // "closed": all no-flow

  if (cfg.gravity) prob.gravity = GravityData{cfg.g, cfg.grad_h_sign};
  prob.validate();
  return prob;
}

/// Explicit-stability step in PVI units at the bootstrap velocity.
inline double cfl_dt_pvi(const FlowProblem& prob) {
  VelocitySolver fine(prob, VelocityBackend::Fine);
  const PressureSolution p0 = fine.solve(prob.s0);
  const double dt_phys =
      cfl_dt(p0.u, prob.props, prob.gravity,
             prob.gravity ? &prob.K : nullptr);
  const double Q = injection_rate(prob, p0.u);
  if (Q <= 0.0) return dt_phys;
  const double pore_volume = prob.grid.num_cells() * prob.grid.cell_volume();
  return dt_phys * Q / pore_volume;
}

/// Assembles the scheme configuration; resolves a CFL-multiple time step
/// against the bootstrap velocity of the given problem.
inline RunConfigCore build_run_core(const RunConfig& cfg,
                                    const FlowProblem& prob) {
  RunConfigCore core;
  core.scheme = cfg.scheme == "sfi" ? Scheme::SFI : Scheme::SI;
  SIConfig& si = core.sfi.si;
  si.T = cfg.T;
  si.dt = cfg.dt_cfl > 0.0 ? cfg.dt_cfl * cfl_dt_pvi(prob) : cfg.dt;
  if (si.dt > si.T) si.dt = si.T;
  si.backend = cfg.backend == "mrcm" ? VelocityBackend::Mrcm
                                     : VelocityBackend::Fine;
  si.mrcm.mx = cfg.mx;
  si.mrcm.my = cfg.my;
  si.mrcm.space = cfg.space == "p0"        ? InterfaceSpaceKind::P0
                  : cfg.space == "physics" ? InterfaceSpaceKind::Physics
                  : cfg.space == "full"    ? InterfaceSpaceKind::FullTrace
                                           : InterfaceSpaceKind::P1;
  si.mrcm.alpha_uniform = cfg.alpha;
  si.mrcm.adaptive_alpha_on = cfg.alpha_adaptive;
  si.mrcm.alpha_low = cfg.alpha_low;
  si.mrcm.alpha_high = cfg.alpha_high;
  si.mrcm.hi_factor = cfg.hi_factor;
  si.mrcm.lo_factor = cfg.lo_factor;
  si.snapshot_times = cfg.snapshot_times;
  si.newton.eta = cfg.eta;
  si.newton.max_iterations = cfg.max_iterations;
  si.newton.strategy = strategy_from_name(cfg.strategy);
  si.newton.gravity_guard = cfg.gravity;
  core.sfi.outer_tol = cfg.outer_tol;
  core.sfi.outer_cap = cfg.outer_cap;
  return core;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Writes a reference field plus a sidecar hash of the configuration that
/// produced it, so later studies can refuse stale references.
inline void save_reference(const CellField& f, const std::string& path,
                           std::uint64_t config_hash) {
  write_field(f, path);
  std::ofstream out(path + ".hash");
  if (!out) throw std::runtime_error("cannot write " + path + ".hash");
  out << config_hash << '\n';
}

inline CellField load_reference(const std::string& path,
                                std::uint64_t expected_hash) {
  std::ifstream in(path + ".hash");
  if (!in)
    throw std::runtime_error("reference " + path + " has no .hash sidecar");
  std::uint64_t stored = 0;
  in >> stored;
  if (stored != expected_hash)
    throw std::runtime_error("stale reference: " + path +
                             " was built from a different configuration");
  return read_field(path);
}

inline void write_ledger_csv(const std::vector<LedgerRow>& ledger,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,time_pvi,newton_iterations,outer_iterations\n";
  out.precision(17);
  for (const auto& row : ledger)
    out << row.step << ',' << row.time << ',' << row.newton_iterations << ','
        << row.outer_iterations << '\n';
}

struct ExperimentResult {
  RunResult run;
  FlowProblem problem;
  RunConfigCore core;
  std::optional<ErrorReport> errors;
};

/// Runs one configured experiment and writes its artifacts: the final
/// saturation, requested snapshots, the iteration ledger, and (when a
/// reference saturation is supplied) an error report.
inline ExperimentResult run_experiment(const RunConfig& cfg,
                                       const std::string& reference_path = "") {
  ExperimentResult res;
  res.problem = build_problem(cfg);
  res.core = build_run_core(cfg, res.problem);
  res.run = run(res.problem, res.core);
  if (!res.run.completed)
    throw std::runtime_error("run aborted: transport solve failed at step " +
                             std::to_string(res.run.ledger.size() + 1));

  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);
  write_field(res.run.final_state.s, (dir / "s_final.txt").string());
  for (std::size_t k = 0; k < res.run.snapshots.size(); ++k)
    write_field(res.run.snapshots[k].s,
                (dir / ("snapshot_" + std::to_string(k) + ".txt")).string());
  write_ledger_csv(res.run.ledger, (dir / "ledger.csv").string());

  if (!reference_path.empty()) {
    const CellField ref = read_field(reference_path);
    ErrorReport rep;
    rep.sat_l1_rel = rel_l1_error(res.run.final_state.s, ref);
    res.errors = rep;
    std::ofstream out((dir / "errors.csv").string());
    if (!out) throw std::runtime_error("cannot write errors.csv");
    out << "metric,value\n";
    out.precision(17);
    out << "sat_l1_rel," << rep.sat_l1_rel << '\n';
  }
  return res;
}

struct ConvergenceStudy {
  std::vector<double> dts;
  std::vector<double> errors;
  double slope = 0.0;
};

/// Runs the base configuration across a time-step ladder against a finer
/// reference step, and fits the log-log convergence slope.  Ladder points
/// whose error is exactly zero (self-references) are excluded from the fit.
inline ConvergenceStudy convergence_study(const RunConfig& base,
                                          const std::vector<double>& dt_ladder,
                                          double dt_reference) {
  if (dt_ladder.size() < 3)
    throw std::invalid_argument("convergence_study: need >= 3 ladder points");
  for (std::size_t k = 1; k < dt_ladder.size(); ++k)
    if (!(dt_ladder[k] > dt_ladder[k - 1]))
      throw std::invalid_argument("convergence_study: ladder must be ascending");
  if (!(dt_reference > 0.0) || dt_reference > dt_ladder.front())
    throw std::invalid_argument(
        "convergence_study: reference step must be finer than the ladder");

  FlowProblem prob = build_problem(base);
  auto solve_at = [&](double dt) {
    RunConfig cfg = base;
    cfg.dt = dt;
    cfg.dt_cfl = 0.0;
    RunConfigCore core = build_run_core(cfg, prob);
    RunResult r = run(prob, core);
    if (!r.completed)
      throw std::runtime_error("convergence_study: run failed at dt = " +
                               std::to_string(dt));
    return r.final_state.s;
  };

  const CellField ref = solve_at(dt_reference);
  ConvergenceStudy out;
  out.dts = dt_ladder;
  for (double dt : dt_ladder) out.errors.push_back(rel_l1_error(solve_at(dt), ref));
  out.slope = loglog_slope(out.dts, out.errors);
  return out;
}

}  // namespace mrcm
