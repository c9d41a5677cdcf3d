#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrcm/darcy.hpp"
#include "mrcm/decomposition.hpp"
#include "mrcm/fluid.hpp"
#include "mrcm/grid.hpp"
#include "mrcm/interface_space.hpp"
#include "mrcm/mrcm.hpp"
#include "mrcm/newton.hpp"
#include "mrcm/perm.hpp"
#include "mrcm/scales.hpp"
#include "mrcm/transport.hpp"

namespace mrcm {

/// Point sources: volume rate per entry (positive = injection at the inlet
/// saturation, negative = production at the local fractional flow).
struct WellEntry {
  int cell = 0;
  double rate = 0.0;
};

struct WellModel {
  std::vector<WellEntry> entries;
  double inlet_sat = 1.0;

  double net_rate() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.rate;
    return s;
  }
};

/// Complete problem definition for one simulation.
struct FlowProblem {
  CartesianGrid grid;
  PermField K;
  FluidProps props;
  BoundarySpec bc;
  WellModel wells;
  CellField s0;
  std::optional<GravityData> gravity;

  void validate() const {
    if (K.size() != grid.num_cells() || s0.size() != grid.num_cells())
      throw std::invalid_argument("FlowProblem: field/grid size mismatch");
    validate_perm(K);
    for (int c = 0; c < s0.size(); ++c) check_saturation(s0[c]);
    bool all_neumann = true;
    auto scan = [&](const std::vector<BcEntry>& v) {
      for (const auto& e : v)
        if (e.type != BcType::Neumann) all_neumann = false;
    };
    scan(bc.left);
    scan(bc.right);
    scan(bc.bottom);
    scan(bc.top);
    if (all_neumann) {
      double boundary_in = 0.0;
      for (std::size_t j = 0; j < bc.left.size(); ++j)
        boundary_in -= (bc.left[j].value + bc.right[j].value) * grid.dy;
      for (std::size_t i = 0; i < bc.bottom.size(); ++i)
        boundary_in -= (bc.bottom[i].value + bc.top[i].value) * grid.dx;
      const double scale = std::max(1.0, std::abs(boundary_in));
      if (std::abs(boundary_in + wells.net_rate()) > 1e-8 * scale)
        throw std::invalid_argument(
            "FlowProblem: all-Neumann boundaries require balanced sources");
    }
  }

  /// Source fields in divergence units (rate / cell volume).
  CellField injection_field() const {
    CellField q(grid);
    for (const auto& e : wells.entries)
      if (e.rate > 0.0) q[e.cell] += e.rate / grid.cell_volume();
    return q;
  }
  CellField production_field() const {
    CellField q(grid);
    for (const auto& e : wells.entries)
      if (e.rate < 0.0) q[e.cell] += e.rate / grid.cell_volume();
    return q;
  }
  CellField total_source_field() const {
    CellField q(grid);
    for (const auto& e : wells.entries) q[e.cell] += e.rate / grid.cell_volume();
    return q;
  }
};

enum class VelocityBackend { Fine, Mrcm };

enum class InterfaceSpaceKind { P0, P1, Physics, FullTrace };

struct MrcmBackendOptions {
  int mx = 2, my = 2;
  InterfaceSpaceKind space = InterfaceSpaceKind::P1;
  double alpha_uniform = 1.0;
  bool adaptive_alpha_on = false;
  double alpha_low = 1e-2, alpha_high = 1e2;
  double hi_factor = 10.0, lo_factor = 10.0;
};

struct SIConfig {
  double dt = 0.0;  // PVI
  double T = 0.0;   // PVI
  VelocityBackend backend = VelocityBackend::Fine;
  MrcmBackendOptions mrcm;
  NewtonConfig newton;
  std::vector<double> snapshot_times;  // PVI

  void validate() const {
    if (!(dt > 0.0) || !(dt <= T * (1.0 + 1e-12)))
      throw std::invalid_argument("SIConfig: need 0 < dt <= T");
  }
};

struct SFIConfig {
  SIConfig si;
  double outer_tol = 1e-4;  // max-norm of the outer saturation change
  int outer_cap = 50;

  void validate() const {
    si.validate();
    if (!(outer_tol > 0.0) || outer_cap < 1)
      throw std::invalid_argument("SFIConfig: need outer_tol > 0, cap >= 1");
  }
};

struct PressureSolution {
  CellField p;
  FaceField u;
};

/// Darcy backend with per-run cached geometry (decomposition, interface
/// spaces, Robin weights).  kappa = lambda(s) * K is rebuilt per solve.
class VelocitySolver {
 public:
  VelocitySolver(const FlowProblem& prob, VelocityBackend backend,
                 const MrcmBackendOptions& opts = {})
      : prob_(prob), backend_(backend), opts_(opts) {
    if (backend_ == VelocityBackend::Mrcm) {
      decomp_ = build_decomposition(prob_.grid, opts_.mx, opts_.my);
      std::vector<ChannelMap> maps;
      switch (opts_.space) {
        case InterfaceSpaceKind::P0:
          spaces_.pressure = build_polynomial_space(decomp_, 0);
          spaces_.flux = build_polynomial_space(decomp_, 0);
          break;
        case InterfaceSpaceKind::P1:
          spaces_.pressure = build_polynomial_space(decomp_, 1);
          spaces_.flux = build_polynomial_space(decomp_, 1);
          break;
        case InterfaceSpaceKind::FullTrace:
          spaces_.pressure = build_full_trace_space(decomp_);
          spaces_.flux = build_full_trace_space(decomp_);
          break;
        case InterfaceSpaceKind::Physics: {
          auto built = build_physics_based_spaces(decomp_, prob_.K,
                                                  opts_.hi_factor,
                                                  opts_.lo_factor);
          spaces_ = std::move(built.first);
          maps = std::move(built.second);
          break;
        }
      }
      if (opts_.adaptive_alpha_on) {
        if (maps.empty()) {
          maps.resize(decomp_.interfaces.size());
          for (std::size_t k = 0; k < decomp_.interfaces.size(); ++k)
            maps[k] = detect_structures(prob_.K, decomp_.interfaces[k],
                                        opts_.hi_factor, opts_.lo_factor);
        }
        alpha_ = adaptive_alpha(decomp_, maps, opts_.alpha_low,
                                opts_.alpha_high);
      } else {
        alpha_ = RobinParamField::uniform(decomp_, opts_.alpha_uniform);
      }
    }
  }

  PressureSolution solve(const CellField& s) const {
    CellField kappa(prob_.grid);
    for (int c = 0; c < kappa.size(); ++c)
      kappa[c] = total_mobility(s[c], prob_.props) * prob_.K[c];
    const CellField q = prob_.total_source_field();
    if (backend_ == VelocityBackend::Fine) {
      EllipticSolution sol = solve_darcy(prob_.grid, kappa, prob_.bc, q);
      return {std::move(sol.p), std::move(sol.u)};
    }
    MrcmSolution ms =
        assemble_and_solve_mrcm(decomp_, kappa, prob_.bc, q, spaces_, alpha_);
    PressureSolution out;
    out.u = downscale_stitch(ms, decomp_, kappa, prob_.bc, q);
    out.p = CellField(prob_.grid);
    for (int sid = 0; sid < decomp_.num_subdomains(); ++sid) {
      const SubdomainBox& box = decomp_.subdomains[sid];
      const CellField& lp = ms.locals[sid].p;
      for (int j = 0; j < box.ny(); ++j)
        for (int i = 0; i < box.nx(); ++i)
          out.p(box.i0 + i, box.j0 + j) = lp[j * box.nx() + i];
    }
    return out;
  }

  const SkeletonDecomposition& decomposition() const { return decomp_; }
  const MrcmSpaces& spaces() const { return spaces_; }
  const RobinParamField& alpha() const { return alpha_; }

 private:
  FlowProblem prob_;
  VelocityBackend backend_;
  MrcmBackendOptions opts_;
  SkeletonDecomposition decomp_;
  MrcmSpaces spaces_;
  RobinParamField alpha_;
};

/// Raised when an implicit transport solve does not converge.
struct StepFailure : std::runtime_error {
  SolveReport report;
  explicit StepFailure(const SolveReport& rep)
      : std::runtime_error("transport Newton solve failed to converge after " +
                           std::to_string(rep.iterations) + " iterations (" +
                           to_string(rep.strategy) + ")"),
        report(rep) {}
};

/// Total injected volume rate: positive well rates plus boundary inflow read
/// from the current velocity field.
inline double injection_rate(const FlowProblem& prob, const FaceField& u) {
  const CartesianGrid& g = prob.grid;
  double Q = 0.0;
  for (const auto& e : prob.wells.entries)
    if (e.rate > 0.0) Q += e.rate;
  for (int j = 0; j < g.ny; ++j) {
    Q += std::max(0.0, u.x(0, j)) * g.dy;        // inflow through the left
    Q += std::max(0.0, -u.x(g.nx, j)) * g.dy;    // inflow through the right
  }
  for (int i = 0; i < g.nx; ++i) {
    Q += std::max(0.0, u.y(i, 0)) * g.dx;
    Q += std::max(0.0, -u.y(i, g.ny)) * g.dx;
  }
  return Q;
}

/// Physical time step equivalent to dt_pvi pore-volume-injected units; a
/// closed system (zero injection) interprets PVI time as physical time.
inline double physical_dt(const FlowProblem& prob, const FaceField& u,
                          double dt_pvi) {
  const double Q = injection_rate(prob, u);
  if (Q <= 0.0) return dt_pvi;
  const CartesianGrid& g = prob.grid;
  const double pore_volume = g.num_cells() * g.cell_volume();
  return dt_pvi * pore_volume / Q;
}

struct StepResult {
  SaturationState state;
  PressureSolution pressure;
  SolveReport newton;     // worst transport solve of the step
  int newton_iterations = 0;  // accumulated over the step
  int outer_iterations = 1;
  bool outer_converged = true;
};

namespace detail {

inline double field_checksum(const FaceField& u) {
  double s = 0.0;
  for (double v : u.ux) s += v;
  for (double v : u.uy) s += v;
  return s;
}

/// One implicit transport solve with a frozen velocity field.
inline std::pair<CellField, SolveReport> implicit_transport(
    const FlowProblem& prob, const FaceField& u, const CellField& s_prev,
    const CellField& s_init, double dt_phys, const NewtonConfig& newton) {
  TransportOperator op;
  op.grid = prob.grid;
  op.u = u;
  op.props = prob.props;
  op.inlet_sat = prob.wells.inlet_sat;
  op.q_inj = prob.injection_field();
  op.q_prod = prob.production_field();
  op.gravity = prob.gravity;
  op.K = prob.K;

  const double checksum_before = field_checksum(op.u);
  auto residual = [&](const CellField& s) { return op.residual(s_prev, s, dt_phys); };
  auto jacobian = [&](const CellField& s) { return op.jacobian(s_prev, s, dt_phys); };
  auto result = newton_solve(residual, jacobian, s_init, newton,
                             prob.props.viscosity_ratio());
  if (field_checksum(op.u) != checksum_before)
    throw std::logic_error("implicit_transport: velocity mutated during solve");
  if (!result.second.converged) throw StepFailure(result.second);
  return result;
}

}  // namespace detail

/// One sequential-implicit step: implicit transport with the frozen incoming
/// velocity, then a pressure update at the new saturation.
inline StepResult si_step(const SaturationState& state,
                          const PressureSolution& pressure,
                          const FlowProblem& prob, const SIConfig& config,
                          const VelocitySolver& velocity) {
  const double dt_phys = physical_dt(prob, pressure.u, config.dt);
  auto [s_new, rep] = detail::implicit_transport(prob, pressure.u, state.s,
                                                 state.s, dt_phys,
                                                 config.newton);
  StepResult out;
  out.state.s = std::move(s_new);
  out.state.time = state.time + config.dt;
  out.pressure = velocity.solve(out.state.s);
  out.newton = rep;
  out.newton_iterations = rep.iterations;
  return out;
}

/// One sequential-fully-implicit step: alternate pressure and transport
/// updates until the outer saturation change drops below tolerance.  An
/// outer cap of 1 reproduces si_step exactly.
inline StepResult sfi_step(const SaturationState& state,
                           const PressureSolution& pressure,
                           const FlowProblem& prob, const SFIConfig& config,
                           const VelocitySolver& velocity) {
  StepResult out;
  out.state.time = state.time + config.si.dt;
  out.outer_converged = false;

  CellField s_iter = state.s;
  PressureSolution pres = pressure;
  const double dt_phys = physical_dt(prob, pressure.u, config.si.dt);
  for (int k = 1; k <= config.outer_cap; ++k) {
    auto [s_new, rep] = detail::implicit_transport(prob, pres.u, state.s,
                                                   s_iter, dt_phys,
                                                   config.si.newton);
    pres = velocity.solve(s_new);
    out.newton_iterations += rep.iterations;
    if (rep.iterations >= out.newton.iterations) out.newton = rep;
    out.outer_iterations = k;
    double change = 0.0;
    for (int c = 0; c < s_new.size(); ++c)
      change = std::max(change, std::abs(s_new[c] - s_iter[c]));
    s_iter = std::move(s_new);
    if (k >= 2 && change <= config.outer_tol) {
      out.outer_converged = true;
      break;
    }
    if (config.outer_cap == 1) break;
  }
  if (config.outer_cap == 1) out.outer_converged = true;
  out.state.s = std::move(s_iter);
  out.pressure = std::move(pres);
  return out;
}

struct LedgerRow {
  int step = 0;
  double time = 0.0;  // PVI at the end of the step
  int newton_iterations = 0;
  int outer_iterations = 1;
};

struct RunResult {
  SaturationState final_state;
  PressureSolution final_pressure;
  std::vector<LedgerRow> ledger;
  std::vector<SaturationState> snapshots;
  bool completed = false;
};

enum class Scheme { SI, SFI };

struct RunConfigCore {
  Scheme scheme = Scheme::SI;
  SFIConfig sfi;  // si member used directly for Scheme::SI
};

/// Fixed-step march to T.  A transport failure aborts the run and returns
/// the partial ledger (completed = false).
inline RunResult run(const FlowProblem& prob, const RunConfigCore& config) {
  prob.validate();
  config.sfi.validate();
  const SIConfig& si = config.sfi.si;

  VelocitySolver velocity(prob, si.backend, si.mrcm);
  RunResult out;
  SaturationState state{prob.s0, 0.0};
  PressureSolution pres = velocity.solve(state.s);  // bootstrap velocity

  const int n_steps =
      static_cast<int>(std::llround(si.T / si.dt) > 0
                           ? std::llround(si.T / si.dt)
                           : 1);
  std::size_t next_snapshot = 0;
  for (int n = 0; n < n_steps; ++n) {
    StepResult step;
    try {
      step = config.scheme == Scheme::SI
                 ? si_step(state, pres, prob, si, velocity)
                 : sfi_step(state, pres, prob, config.sfi, velocity);
    } catch (const StepFailure&) {
      out.final_state = state;
      out.final_pressure = pres;
      return out;  // completed stays false; partial ledger preserved
    }
    state = step.state;
    pres = step.pressure;
    out.ledger.push_back(
        {n + 1, state.time, step.newton_iterations, step.outer_iterations});
    while (next_snapshot < si.snapshot_times.size() &&
           state.time >= si.snapshot_times[next_snapshot] * (1.0 - 1e-12)) {
      out.snapshots.push_back(state);
      ++next_snapshot;
    }
  }
  out.final_state = std::move(state);
  out.final_pressure = std::move(pres);
  out.completed = true;
  return out;
}

/// Maps a problem to dimensionless variables (forward) or back.  Velocities
/// scale by u_ref, pressures by p_ref, Robin weights by p_ref/u_ref,
/// lengths by L, permeability by K_max, viscosities by mu_w, densities by
/// rho_w, gravity by g_ref, and volume rates by u_ref*L.
inline FlowProblem transform_units(const FlowProblem& prob,
                                   const DimensionlessScales& sc,
                                   bool forward) {
  sc.validate();
  auto down = [&](double v, double ref) { return forward ? v / ref : v * ref; };

  FlowProblem out = prob;
  out.grid = CartesianGrid(prob.grid.nx, prob.grid.ny,
                           down(prob.grid.dx, sc.L), down(prob.grid.dy, sc.L),
                           down(prob.grid.x0, sc.L), down(prob.grid.y0, sc.L));
  out.K = CellField(out.grid);
  out.s0 = CellField(out.grid);
  for (int c = 0; c < prob.K.size(); ++c) {
    out.K[c] = down(prob.K[c], sc.K_max);
    out.s0[c] = prob.s0[c];
  }
  out.props = FluidProps(down(prob.props.mu_w, sc.mu_w),
                         down(prob.props.mu_o, sc.mu_w),
                         down(prob.props.rho_w, sc.rho_w),
                         down(prob.props.rho_o, sc.rho_w));
  const double beta_ref = sc.p_ref / sc.u_ref;
  auto map_bc = [&](std::vector<BcEntry>& v) {
    for (auto& e : v) {
      if (e.type == BcType::Neumann)
        e.value = down(e.value, sc.u_ref);
      else
        e.value = down(e.value, sc.p_ref);
      e.beta = down(e.beta, beta_ref);
    }
  };
  map_bc(out.bc.left);
  map_bc(out.bc.right);
  map_bc(out.bc.bottom);
  map_bc(out.bc.top);
  for (auto& e : out.wells.entries) e.rate = down(e.rate, sc.u_ref * sc.L);
  if (out.gravity) out.gravity->g = down(out.gravity->g, sc.g_ref);
  return out;
}

inline FlowProblem nondimensionalize(const FlowProblem& prob,
                                     const DimensionlessScales& sc) {
  return transform_units(prob, sc, true);
}

inline FlowProblem redimensionalize(const FlowProblem& prob,
                                    const DimensionlessScales& sc) {
  return transform_units(prob, sc, false);
}

}  // namespace mrcm
