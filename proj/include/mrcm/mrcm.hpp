#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcm/darcy.hpp"
#include "mrcm/decomposition.hpp"
#include "mrcm/interface_space.hpp"

namespace mrcm {

/// Result of one multiscale solve: interface coefficients, reconstructed
/// local solutions, and per-interface edge data used for diagnostics and
/// stitching.
struct MrcmSolution {
  Eigen::VectorXd coeffs;  // flux block first, then pressure block
  int n_flux_dofs = 0;
  int n_pressure_dofs = 0;
  std::vector<EllipticSolution> locals;  // per subdomain

  struct InterfaceData {
    // u.n in the fixed-normal direction, from the lower / higher side.
    std::vector<double> flux_lo, flux_hi;
    std::vector<double> beta_lo, beta_hi;
    std::vector<double> U, P;  // interface unknowns sampled per edge
  };
  std::vector<InterfaceData> ifaces;
};

namespace detail {

/// Side-of-subdomain bookkeeping for the local Robin problems.
struct SubContext {
  CartesianGrid local_grid;
  CellField kappa;
  CellField q;
  BoundarySpec bc_zero;     // assembly structure, all values zero
  BoundarySpec bc_outer;    // outer boundary values filled in
  // Interface on each side (-1 = outer boundary): Left, Right, Bottom, Top.
  int iface[4] = {-1, -1, -1, -1};
  int sigma[4] = {0, 0, 0, 0};  // n.n_i on that side (+1 lo side, -1 hi side)
  std::vector<double> beta[4];  // per edge, this side's Robin parameter
};

inline SubContext make_sub_context(const SkeletonDecomposition& d,
                                   const CellField& kappa, const CellField& q,
                                   const BoundarySpec& bc,
                                   const RobinParamField& alpha, int sid) {
  const SubdomainBox& box = d.subdomains[sid];
  const CartesianGrid& g = d.grid;
  SubContext ctx;
  ctx.local_grid = CartesianGrid(box.nx(), box.ny(), g.dx, g.dy,
                                 g.x0 + box.i0 * g.dx, g.y0 + box.j0 * g.dy);
  ctx.kappa = CellField(ctx.local_grid);
  ctx.q = CellField(ctx.local_grid);
  for (int j = 0; j < box.ny(); ++j)
    for (int i = 0; i < box.nx(); ++i) {
      ctx.kappa(i, j) = kappa(box.i0 + i, box.j0 + j);
      ctx.q(i, j) = q(box.i0 + i, box.j0 + j);
    }

  for (int fid : d.sub_interfaces[sid]) {
    const Interface& f = d.interfaces[fid];
    int side;
    if (f.axis == InterfaceAxis::X)
      side = (f.sub_lo == sid) ? 1 : 0;  // Right : Left
    else
      side = (f.sub_lo == sid) ? 3 : 2;  // Top : Bottom
    ctx.iface[side] = fid;
    ctx.sigma[side] = (f.sub_lo == sid) ? 1 : -1;
    const double H = d.coarse_size(f.axis);
    ctx.beta[side].resize(f.faces.size());
    for (int e = 0; e < f.num_edges(); ++e) {
      const int adj = (f.sub_lo == sid) ? f.cells_lo[e] : f.cells_hi[e];
      const double k_adj = kappa[adj];
      ctx.beta[side][e] = alpha.alpha[fid][e] * H / k_adj;
    }
  }

  BoundarySpec lb = BoundarySpec::no_flow(ctx.local_grid);
  auto fill_side = [&](Side s, int side_idx,
                       const std::vector<BcEntry>& global_entries, int offset) {
    auto& entries = lb.side(s);
    if (ctx.iface[side_idx] >= 0) {
      for (std::size_t e = 0; e < entries.size(); ++e)
        entries[e] = {BcType::Robin, 0.0, ctx.beta[side_idx][e]};
    } else {
      for (std::size_t e = 0; e < entries.size(); ++e)
        entries[e] = global_entries[offset + e];
    }
  };
  fill_side(Side::Left, 0, bc.left, box.j0);
  fill_side(Side::Right, 1, bc.right, box.j0);
  fill_side(Side::Bottom, 2, bc.bottom, box.i0);
  fill_side(Side::Top, 3, bc.top, box.i0);
  ctx.bc_outer = lb;
  ctx.bc_zero = lb;
  for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top})
    for (auto& e : ctx.bc_zero.side(s))
      if (e.type != BcType::Robin) e.value = 0.0;
  return ctx;
}

/// Outward-normal velocity trace (u . n_i) along one side of a local
/// solution, ordered as the interface's edges.
inline std::vector<double> side_trace(const EllipticSolution& sol, int side) {
  const CartesianGrid& g = sol.u.grid;
  std::vector<double> t;
  if (side == 0) {  // Left: outward = -x
    t.resize(g.ny);
    for (int j = 0; j < g.ny; ++j) t[j] = -sol.u.x(0, j);
  } else if (side == 1) {  // Right
    t.resize(g.ny);
    for (int j = 0; j < g.ny; ++j) t[j] = sol.u.x(g.nx, j);
  } else if (side == 2) {  // Bottom: outward = -y
    t.resize(g.nx);
    for (int i = 0; i < g.nx; ++i) t[i] = -sol.u.y(i, 0);
  } else {  // Top
    t.resize(g.nx);
    for (int i = 0; i < g.nx; ++i) t[i] = sol.u.y(i, g.ny);
  }
  return t;
}

}  // namespace detail

/// Global dof numbering: flux dofs per interface first, then pressure dofs.
struct MrcmDofMap {
  std::vector<int> flux_offset;      // per interface
  std::vector<int> pressure_offset;  // per interface, relative to flux total
  int n_flux = 0;
  int n_pressure = 0;

  MrcmDofMap() = default;
  MrcmDofMap(const SkeletonDecomposition& d, const MrcmSpaces& spaces) {
    flux_offset.resize(d.interfaces.size());
    pressure_offset.resize(d.interfaces.size());
    for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
      flux_offset[k] = n_flux;
      n_flux += spaces.flux.dofs_on(static_cast<int>(k));
    }
    for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
      pressure_offset[k] = n_pressure;
      n_pressure += spaces.pressure.dofs_on(static_cast<int>(k));
    }
  }
  int dim() const { return n_flux + n_pressure; }
  int flux_dof(int iface, int m) const { return flux_offset[iface] + m; }
  int pressure_dof(int iface, int m) const {
    return n_flux + pressure_offset[iface] + m;
  }
};

/// Solves the multiscale Robin-coupled problem: local basis solves per
/// subdomain, dense global interface system, and reconstruction of the
/// local solutions at the solved interface data.
inline MrcmSolution assemble_and_solve_mrcm(const SkeletonDecomposition& d,
                                            const CellField& kappa,
                                            const BoundarySpec& bc,
                                            const CellField& q,
                                            const MrcmSpaces& spaces,
                                            const RobinParamField& alpha) {
  const int ns = d.num_subdomains();
  const MrcmDofMap dofs(d, spaces);
  const int dim = dofs.dim();

  for (std::size_t k = 0; k < d.interfaces.size(); ++k)
    if (spaces.pressure.basis[k].empty() || spaces.flux.basis[k].empty())
      throw std::invalid_argument(
          "assemble_and_solve_mrcm: empty interface space on interface " +
          std::to_string(k));

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

  std::vector<detail::SubContext> ctxs;
  std::vector<DarcyOperator> ops;
  ctxs.reserve(ns);
  ops.reserve(ns);
  for (int sid = 0; sid < ns; ++sid) {
    ctxs.push_back(detail::make_sub_context(d, kappa, q, bc, alpha, sid));
    ops.emplace_back(ctxs.back().local_grid, ctxs.back().kappa,
                     ctxs.back().bc_zero);
  }

  // Accumulates the traces of one local solve into the global system:
  // column < 0 means the particular solution (goes to the rhs).
  auto scatter = [&](int sid, const EllipticSolution& sol, int column) {
    const detail::SubContext& ctx = ctxs[sid];
    for (int side = 0; side < 4; ++side) {
      const int fid = ctx.iface[side];
      if (fid < 0) continue;
      const Interface& f = d.interfaces[fid];
      const std::vector<double> trace = detail::side_trace(sol, side);
      const double h = f.edge_len;
      const double sg = ctx.sigma[side];
      // Pressure-test rows: sum_i int (u.n_i) psi.
      const auto& pb = spaces.pressure.basis[fid];
      for (std::size_t m = 0; m < pb.size(); ++m) {
        double val = 0.0;
        for (int e = 0; e < f.num_edges(); ++e) val += trace[e] * pb[m][e] * h;
        const int row = dofs.pressure_dof(fid, static_cast<int>(m));
        if (column >= 0)
          A(row, column) += val;
        else
          b[row] -= val;
      }
      // Flux-test rows: sum_i int beta_i (u.n_i) phi sigma.
      const auto& fb = spaces.flux.basis[fid];
      for (std::size_t m = 0; m < fb.size(); ++m) {
        double val = 0.0;
        for (int e = 0; e < f.num_edges(); ++e)
          val += ctx.beta[side][e] * trace[e] * fb[m][e] * sg * h;
        const int row = dofs.flux_dof(fid, static_cast<int>(m));
        if (column >= 0)
          A(row, column) += val;
        else
          b[row] -= val;
      }
    }
  };

  for (int sid = 0; sid < ns; ++sid) {
    const detail::SubContext& ctx = ctxs[sid];
    // Particular solution: true sources and outer data, zero interface data.
    scatter(sid, ops[sid].solve(ctx.bc_outer, ctx.q), -1);

    const CellField zero_q(ctx.local_grid);
    for (int side = 0; side < 4; ++side) {
      const int fid = ctx.iface[side];
      if (fid < 0) continue;
      const Interface& f = d.interfaces[fid];
      static const Side kSides[4] = {Side::Left, Side::Right, Side::Bottom,
                                     Side::Top};
      // Pressure dofs: Robin data r = psi.
      const auto& pb = spaces.pressure.basis[fid];
      for (std::size_t m = 0; m < pb.size(); ++m) {
        BoundarySpec vals = ctx.bc_zero;
        auto& entries = vals.side(kSides[side]);
        for (int e = 0; e < f.num_edges(); ++e) entries[e].value = pb[m][e];
        scatter(sid, ops[sid].solve(vals, zero_q),
                dofs.pressure_dof(fid, static_cast<int>(m)));
      }
      // Flux dofs: Robin data r = -beta * phi * sigma.
      const auto& fb = spaces.flux.basis[fid];
      for (std::size_t m = 0; m < fb.size(); ++m) {
        BoundarySpec vals = ctx.bc_zero;
        auto& entries = vals.side(kSides[side]);
        for (int e = 0; e < f.num_edges(); ++e)
          entries[e].value = -ctx.beta[side][e] * fb[m][e] * ctx.sigma[side];
        scatter(sid, ops[sid].solve(vals, zero_q),
                dofs.flux_dof(fid, static_cast<int>(m)));
      }
    }
  }

  // Direct U_H coupling in the flux-test rows:
  // -sum_i int beta_i U_H phi  (sigma^2 = 1), both sides of each interface.
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    const Interface& f = d.interfaces[k];
    // Locate the two sides' beta arrays.
    const detail::SubContext& clo = ctxs[f.sub_lo];
    const detail::SubContext& chi = ctxs[f.sub_hi];
    const double h = f.edge_len;
    std::vector<double> beta_sum(f.num_edges());
    for (int side = 0; side < 4; ++side) {
      if (clo.iface[side] == static_cast<int>(k))
        for (int e = 0; e < f.num_edges(); ++e)
          beta_sum[e] = clo.beta[side][e];
    }
    for (int side = 0; side < 4; ++side) {
      if (chi.iface[side] == static_cast<int>(k))
        for (int e = 0; e < f.num_edges(); ++e)
          beta_sum[e] += chi.beta[side][e];
    }
    const auto& fb = spaces.flux.basis[k];
    for (std::size_t m = 0; m < fb.size(); ++m) {
      const int row = dofs.flux_dof(static_cast<int>(k), static_cast<int>(m));
      for (std::size_t mp = 0; mp < fb.size(); ++mp) {
        const int col = dofs.flux_dof(static_cast<int>(k),
                                      static_cast<int>(mp));
        double val = 0.0;
        for (int e = 0; e < f.num_edges(); ++e)
          val += beta_sum[e] * fb[mp][e] * fb[m][e] * h;
        A(row, col) -= val;
      }
    }
  }

  MrcmSolution out;
  out.n_flux_dofs = dofs.n_flux;
  out.n_pressure_dofs = dofs.n_pressure;
  if (dim > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < dim) {
      // Map the first deficient column back to its interface.
      int col = static_cast<int>(lu.rank());
      std::string which = "unknown";
      for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
        const int lo = dofs.flux_offset[k];
        const int hi = lo + spaces.flux.dofs_on(static_cast<int>(k));
        const int plo = dofs.n_flux + dofs.pressure_offset[k];
        const int phi = plo + spaces.pressure.dofs_on(static_cast<int>(k));
        if ((col >= lo && col < hi) || (col >= plo && col < phi))
          which = std::to_string(k);
      }
      throw std::runtime_error(
          "assemble_and_solve_mrcm: rank-deficient interface system near interface " +
          which);
    }
    out.coeffs = lu.solve(b);
  } else {
    out.coeffs = Eigen::VectorXd();
  }

  // Reconstruction: one final local solve per subdomain at the solved
  // interface data (equals particular + sum of coefficient-weighted bases
  // by linearity).
  out.locals.resize(ns);
  out.ifaces.resize(d.interfaces.size());
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    const Interface& f = d.interfaces[k];
    auto& data = out.ifaces[k];
    const int ne = f.num_edges();
    data.U.assign(ne, 0.0);
    data.P.assign(ne, 0.0);
    const auto& fb = spaces.flux.basis[k];
    for (std::size_t m = 0; m < fb.size(); ++m) {
      const double c = out.coeffs[dofs.flux_dof(static_cast<int>(k),
                                                static_cast<int>(m))];
      for (int e = 0; e < ne; ++e) data.U[e] += c * fb[m][e];
    }
    const auto& pb = spaces.pressure.basis[k];
    for (std::size_t m = 0; m < pb.size(); ++m) {
      const double c = out.coeffs[dofs.pressure_dof(static_cast<int>(k),
                                                    static_cast<int>(m))];
      for (int e = 0; e < ne; ++e) data.P[e] += c * pb[m][e];
    }
  }

  for (int sid = 0; sid < ns; ++sid) {
    const detail::SubContext& ctx = ctxs[sid];
    BoundarySpec vals = ctx.bc_outer;
    static const Side kSides[4] = {Side::Left, Side::Right, Side::Bottom,
                                   Side::Top};
    for (int side = 0; side < 4; ++side) {
      const int fid = ctx.iface[side];
      if (fid < 0) continue;
      auto& entries = vals.side(kSides[side]);
      const auto& data = out.ifaces[fid];
      for (std::size_t e = 0; e < entries.size(); ++e)
        entries[e].value = -ctx.beta[side][e] * data.U[e] * ctx.sigma[side] +
                           data.P[e];
    }
    out.locals[sid] = ops[sid].solve(vals, ctx.q);
  }

  // Final interface traces and betas for diagnostics / stitching.
  for (int sid = 0; sid < ns; ++sid) {
    const detail::SubContext& ctx = ctxs[sid];
    for (int side = 0; side < 4; ++side) {
      const int fid = ctx.iface[side];
      if (fid < 0) continue;
      auto& data = out.ifaces[fid];
      std::vector<double> tr = detail::side_trace(out.locals[sid], side);
      if (ctx.sigma[side] > 0) {
        data.beta_lo = ctx.beta[side];
        data.flux_lo = tr;  // n_i = n
      } else {
        data.beta_hi = ctx.beta[side];
        data.flux_hi.resize(tr.size());
        for (std::size_t e = 0; e < tr.size(); ++e) data.flux_hi[e] = -tr[e];
      }
    }
  }
  return out;
}

struct CompatibilityResiduals {
  double flux_jump_rel = 0.0;
  double robin_jump_rel = 0.0;
};

/// Residuals of the two weak-continuity conditions after the global solve,
/// relative to the corresponding absolute-value integrals.
inline CompatibilityResiduals mrcm_compatibility(
    const MrcmSolution& sol, const SkeletonDecomposition& d,
    const MrcmSpaces& spaces) {
  CompatibilityResiduals r;
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    const Interface& f = d.interfaces[k];
    const auto& data = sol.ifaces[k];
    const double h = f.edge_len;
    for (const auto& psi : spaces.pressure.basis[k]) {
      double num = 0.0, den = 1e-300;
      for (int e = 0; e < f.num_edges(); ++e) {
        num += (data.flux_lo[e] - data.flux_hi[e]) * psi[e] * h;
        den += (std::abs(data.flux_lo[e]) + std::abs(data.flux_hi[e])) *
               std::abs(psi[e]) * h;
      }
      r.flux_jump_rel = std::max(r.flux_jump_rel, std::abs(num) / den);
    }
    for (const auto& phi : spaces.flux.basis[k]) {
      double num = 0.0, den = 1e-300;
      for (int e = 0; e < f.num_edges(); ++e) {
        // sum_i beta_i (u.n_i - U sigma_i) phi sigma_i
        const double lo_term = data.beta_lo[e] * (data.flux_lo[e] - data.U[e]);
        const double hi_term =
            data.beta_hi[e] * (-data.flux_hi[e] + data.U[e]) * (-1.0);
        num += (lo_term + hi_term) * phi[e] * h;
        den += (data.beta_lo[e] *
                    (std::abs(data.flux_lo[e]) + std::abs(data.U[e])) +
                data.beta_hi[e] *
                    (std::abs(data.flux_hi[e]) + std::abs(data.U[e]))) *
               std::abs(phi[e]) * h;
      }
      r.robin_jump_rel = std::max(r.robin_jump_rel, std::abs(num) / den);
    }
  }
  return r;
}

/// Conservative downscaling: average the two one-sided interface fluxes,
/// re-solve every subdomain with those fluxes as Neumann data (original
/// outer conditions kept), distributing any compatibility defect uniformly
/// over the subdomain's cells, and stitch the single-valued velocity.
inline FaceField downscale_stitch(const MrcmSolution& sol,
                                  const SkeletonDecomposition& d,
                                  const CellField& kappa,
                                  const BoundarySpec& bc, const CellField& q) {
  const CartesianGrid& g = d.grid;
  FaceField out(g);
  const int ns = d.num_subdomains();
  for (int sid = 0; sid < ns; ++sid) {
    const SubdomainBox& box = d.subdomains[sid];
    CartesianGrid lg(box.nx(), box.ny(), g.dx, g.dy, g.x0 + box.i0 * g.dx,
                     g.y0 + box.j0 * g.dy);
    CellField lk(lg), lq(lg);
    for (int j = 0; j < box.ny(); ++j)
      for (int i = 0; i < box.nx(); ++i) {
        lk(i, j) = kappa(box.i0 + i, box.j0 + j);
        lq(i, j) = q(box.i0 + i, box.j0 + j);
      }

    BoundarySpec lb = BoundarySpec::no_flow(lg);
    // Outer sides first.
    for (int j = 0; j < box.ny(); ++j) {
      if (box.i0 == 0) lb.left[j] = bc.left[box.j0 + j];
      if (box.i1 == g.nx) lb.right[j] = bc.right[box.j0 + j];
    }
    for (int i = 0; i < box.nx(); ++i) {
      if (box.j0 == 0) lb.bottom[i] = bc.bottom[box.i0 + i];
      if (box.j1 == g.ny) lb.top[i] = bc.top[box.i0 + i];
    }
    // Interface sides: averaged flux as Neumann data (outward normal).
    for (int fid : d.sub_interfaces[sid]) {
      const Interface& f = d.interfaces[fid];
      const auto& data = sol.ifaces[fid];
      const bool is_lo = f.sub_lo == sid;
      for (int e = 0; e < f.num_edges(); ++e) {
        const double avg = 0.5 * (data.flux_lo[e] + data.flux_hi[e]);
        const double outward = is_lo ? avg : -avg;
        if (f.axis == InterfaceAxis::X) {
          auto& side = is_lo ? lb.right : lb.left;
          side[e] = {BcType::Neumann, outward, 0.0};
        } else {
          auto& side = is_lo ? lb.top : lb.bottom;
          side[e] = {BcType::Neumann, outward, 0.0};
        }
      }
    }

    // Compatibility rebalancing for all-Neumann local problems.
    bool all_neumann = true;
    for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top})
      for (const auto& e : lb.side(s))
        if (e.type != BcType::Neumann) all_neumann = false;
    if (all_neumann) {
      double outflux = 0.0;
      for (int j = 0; j < box.ny(); ++j)
        outflux += (lb.left[j].value + lb.right[j].value) * g.dy;
      for (int i = 0; i < box.nx(); ++i)
        outflux += (lb.bottom[i].value + lb.top[i].value) * g.dx;
      double qsum = 0.0;
      for (int c = 0; c < lq.size(); ++c) qsum += lq[c] * lg.cell_volume();
      const double defect = outflux - qsum;
      const double per_cell = defect / (lg.num_cells() * lg.cell_volume());
      for (int c = 0; c < lq.size(); ++c) lq[c] += per_cell;
    }

    EllipticSolution ls = solve_darcy(lg, lk, lb, lq);
    for (int j = 0; j < box.ny(); ++j)
      for (int i = 0; i <= box.nx(); ++i)
        out.x(box.i0 + i, box.j0 + j) = ls.u.x(i, j);
    for (int j = 0; j <= box.ny(); ++j)
      for (int i = 0; i < box.nx(); ++i)
        out.y(box.i0 + i, box.j0 + j) = ls.u.y(i, j);
  }
  return out;
}

}  // namespace mrcm
