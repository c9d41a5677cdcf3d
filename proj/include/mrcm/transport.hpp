#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mrcm/darcy.hpp"
#include "mrcm/fluid.hpp"
#include "mrcm/grid.hpp"
#include "mrcm/perm.hpp"

namespace mrcm {

struct SaturationState {
  CellField s;
  double time = 0.0;  // PVI
};

/// Gravity acts along y only; grad_h_sign = -1 means h decreases toward +y
/// (the physically common case: heavy water settles downward).
struct GravityData {
  double g = 0.0;
  int grad_h_sign = -1;
};

/// Face fluxes in volume-rate form: F entries match FaceField::ux layout
/// (already multiplied by dy), G entries match FaceField::uy (times dx).
struct FaceFluxes {
  std::vector<double> F;
  std::vector<double> G;
};

namespace detail {

/// Donor cell index for one face, or -1 when the inlet value feeds the face.
struct Donor {
  int cell = -1;
  double s_value = 0.0;  // inlet saturation when cell < 0
};

}  // namespace detail

/// First-order upwind viscous fluxes F = dy*f(s_up)*ux, G = dx*f(s_up)*uy.
/// Inflow boundary faces take the inlet saturation as the upwind value.
inline FaceFluxes viscous_fluxes(const CellField& s, const FaceField& u,
                                 const FluidProps& props,
                                 double inlet_sat = 1.0) {
  const CartesianGrid& g = u.grid;
  const double M = props.viscosity_ratio();
  FaceFluxes fx;
  fx.F.assign(u.ux.size(), 0.0);
  fx.G.assign(u.uy.size(), 0.0);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      const double v = u.x(i, j);
      if (v == 0.0) continue;
      double s_up;
      if (v > 0.0)
        s_up = (i > 0) ? s(i - 1, j) : inlet_sat;
      else
        s_up = (i < g.nx) ? s(i, j) : inlet_sat;
      fx.F[u.xf(i, j)] = g.dy * fractional_flow(s_up, M).f * v;
    }
  }
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double v = u.y(i, j);
      if (v == 0.0) continue;
      double s_up;
      if (v > 0.0)
        s_up = (j > 0) ? s(i, j - 1) : inlet_sat;
      else
        s_up = (j < g.ny) ? s(i, j) : inlet_sat;
      fx.G[u.yf(i, j)] = g.dx * fractional_flow(s_up, M).f * v;
    }
  }
  return fx;
}

/// Buoyancy-driven fluxes of the implicit hybrid upwinding split, on interior
/// horizontal faces only (gravity acts along y; domain boundaries are closed
/// to the segregation flux).  The donor assignment depends only on the sign
/// of g * grad_h_sign, so it never switches with the state.
inline std::vector<double> gravity_fluxes(const CellField& s,
                                          const FluidProps& props,
                                          const GravityData& gravity,
                                          const PermField& K) {
  const CartesianGrid& g = s.grid;
  FaceField probe(g);
  std::vector<double> G(probe.uy.size(), 0.0);
  const double c = (props.rho_w - props.rho_o) * gravity.g * gravity.grad_h_sign;
  if (c == 0.0) return G;
  // For face (i, j+1/2): when g*grad_h_sign > 0 the lower cell donates the
  // water mobility and the upper cell the oil mobility; flipped otherwise.
  const bool water_from_lower = gravity.g * gravity.grad_h_sign > 0.0;
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int lo = g.cell(i, j - 1), hi = g.cell(i, j);
      const double s_w = water_from_lower ? s[lo] : s[hi];
      const double s_o = water_from_lower ? s[hi] : s[lo];
      const double lw = mobilities(s_w, props).lam_w;
      const double lo_m = mobilities(s_o, props).lam_o;
      const double den = lw + lo_m;
      if (den == 0.0) continue;
      const double kf = 2.0 * K[lo] * K[hi] / (K[lo] + K[hi]);
      G[probe.yf(i, j)] = g.dx * kf * (lw * lo_m / den) * c;
    }
  }
  return G;
}

/// Implicit transport operator for one time step: residual H and its sparse
/// five-point Jacobian at a trial saturation, with the velocity frozen.
/// Optional cell sources: q_inj >= 0 injects fluid at the inlet saturation,
/// q_prod <= 0 removes fluid at the local fractional flow.
struct TransportOperator {
  CartesianGrid grid;
  FaceField u;
  FluidProps props;
  double inlet_sat = 1.0;
  CellField q_inj;
  CellField q_prod;
  std::optional<GravityData> gravity;
  PermField K;  // used only when gravity is set

  bool has_sources() const { return q_inj.size() > 0 || q_prod.size() > 0; }

  CellField residual(const CellField& s_prev, const CellField& s,
                     double dt) const {
    if (s.size() != grid.num_cells() || s_prev.size() != grid.num_cells())
      throw std::invalid_argument("TransportOperator: field size mismatch");
    const double M = props.viscosity_ratio();
    FaceFluxes fx = viscous_fluxes(s, u, props, inlet_sat);
    std::vector<double> Gg;
    if (gravity) Gg = gravity_fluxes(s, props, *gravity, K);

    CellField h(grid);
    const double inv_v = dt / grid.cell_volume();
    FaceField probe(grid);
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const int c = grid.cell(i, j);
        double bal = fx.F[probe.xf(i + 1, j)] - fx.F[probe.xf(i, j)] +
                     fx.G[probe.yf(i, j + 1)] - fx.G[probe.yf(i, j)];
        if (gravity) bal += Gg[probe.yf(i, j + 1)] - Gg[probe.yf(i, j)];
        h[c] = s[c] - s_prev[c] + inv_v * bal;
        if (q_inj.size() > 0)
          h[c] -= dt * q_inj[c] * fractional_flow(inlet_sat, M).f;
        if (q_prod.size() > 0)
          h[c] -= dt * q_prod[c] * fractional_flow(s[c], M).f;
      }
    }
    return h;
  }

  Eigen::SparseMatrix<double> jacobian(const CellField& /*s_prev*/,
                                       const CellField& s, double dt) const {
    const int n = grid.num_cells();
    const double M = props.viscosity_ratio();
    const double inv_v = dt / grid.cell_volume();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5 * n));
    std::vector<double> diag(static_cast<std::size_t>(n), 1.0);

    // Viscous part: each face contributes d(flux)/d(s_donor) to the two
    // adjacent cell balances (or one, at boundaries).
    FaceField probe(grid);
    auto add = [&](int row, int col, double v) {
      if (col >= 0) {
        if (row == col)
          diag[row] += v;
        else
          trip.emplace_back(row, col, v);
      }
    };
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i <= grid.nx; ++i) {
        const double v = u.x(i, j);
        if (v == 0.0) continue;
        int donor;
        if (v > 0.0)
          donor = (i > 0) ? grid.cell(i - 1, j) : -1;
        else
          donor = (i < grid.nx) ? grid.cell(i, j) : -1;
        if (donor < 0) continue;
        const double d = grid.dy * fractional_flow(s[donor], M).df * v * inv_v;
        if (i < grid.nx) add(grid.cell(i, j), donor, -d);      // incoming
        if (i > 0) add(grid.cell(i - 1, j), donor, d);          // outgoing
      }
    }
    for (int j = 0; j <= grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const double v = u.y(i, j);
        if (v == 0.0) continue;
        int donor;
        if (v > 0.0)
          donor = (j > 0) ? grid.cell(i, j - 1) : -1;
        else
          donor = (j < grid.ny) ? grid.cell(i, j) : -1;
        if (donor < 0) continue;
        const double d = grid.dx * fractional_flow(s[donor], M).df * v * inv_v;
        if (j < grid.ny) add(grid.cell(i, j), donor, -d);
        if (j > 0) add(grid.cell(i, j - 1), donor, d);
      }
    }

    if (gravity) {
      const double c =
          (props.rho_w - props.rho_o) * gravity->g * gravity->grad_h_sign;
      const bool water_from_lower = gravity->g * gravity->grad_h_sign > 0.0;
      if (c != 0.0) {
        for (int j = 1; j < grid.ny; ++j) {
          for (int i = 0; i < grid.nx; ++i) {
            const int lo = grid.cell(i, j - 1), hi = grid.cell(i, j);
            const int dw = water_from_lower ? lo : hi;
            const int dn = water_from_lower ? hi : lo;
            const Mobilities mw = mobilities(s[dw], props);
            const Mobilities mo = mobilities(s[dn], props);
            const double lw = mw.lam_w, lo_m = mo.lam_o;
            const double den = lw + lo_m;
            if (den == 0.0) continue;
            const double kf = 2.0 * K[lo] * K[hi] / (K[lo] + K[hi]);
            const double pre = grid.dx * kf * c * inv_v;
            // d/dlam_w and d/dlam_o of lw*lo/(lw+lo), quotient rule with the
            // frozen donor assignment.
            const double d_dw = pre * (lo_m * lo_m / (den * den)) * mw.dlam_w;
            const double d_dn = pre * (lw * lw / (den * den)) * mo.dlam_o;
            // Flux leaves cell lo upward: +d on row lo, -d on row hi.
            add(lo, dw, d_dw);
            add(lo, dn, d_dn);
            add(hi, dw, -d_dw);
            add(hi, dn, -d_dn);
          }
        }
      }
    }

    if (q_prod.size() > 0) {
      for (int cidx = 0; cidx < n; ++cidx)
        diag[cidx] -= dt * q_prod[cidx] * fractional_flow(s[cidx], M).df;
    }

    for (int cidx = 0; cidx < n; ++cidx)
      trip.emplace_back(cidx, cidx, diag[cidx]);
    Eigen::SparseMatrix<double> jac(n, n);
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  }
};

constexpr double kNoCflLimit = std::numeric_limits<double>::infinity();

inline double max_fractional_flow_slope(double M, int samples = 4001) {
  double m = 0.0;
  for (int k = 0; k <= samples; ++k)
    m = std::max(m, fractional_flow(static_cast<double>(k) / samples, M).df);
  return m;
}

/// Explicit-stability time-step bound min(dx)/max|F'(s)|.  Without gravity
/// the slope is max|u| * max f'; with gravity the closed-form envelope
/// max|f'u| + 2|(rho_w-rho_o) g grad_h| max K / mu_o applies for M <= 10,
/// otherwise the total flux derivative is sampled densely.
inline double cfl_dt(const FaceField& u, const FluidProps& props,
                     const std::optional<GravityData>& gravity = std::nullopt,
                     const PermField* K = nullptr) {
  const CartesianGrid& g = u.grid;
  const double M = props.viscosity_ratio();
  const double umax = u.max_abs();
  const double dmin = std::min(g.dx, g.dy);
  const double visc = umax * max_fractional_flow_slope(M);

  double slope = visc;
  if (gravity && gravity->g != 0.0 && K != nullptr) {
    double kmax = 0.0;
    for (int c = 0; c < K->size(); ++c) kmax = std::max(kmax, (*K)[c]);
    const double gc = std::abs((props.rho_w - props.rho_o) * gravity->g);
    if (M <= 10.0) {
      slope = visc + 2.0 * gc * kmax / props.mu_o;
    } else {
      // Dense sampling of |d/ds [f(s)(u + K lam_o(s)(rho_w-rho_o) g)]|
      // at the worst-case |u| and K.
      const int ns = 20001;
      double m = 0.0;
      for (int k = 0; k <= ns; ++k) {
        const double s = static_cast<double>(k) / ns;
        const FracFlow ff = fractional_flow(s, M);
        const Mobilities mb = mobilities(s, props);
        const double term =
            std::abs(ff.df * umax) +
            std::abs(kmax * gc * (ff.df * mb.lam_o + ff.f * mb.dlam_o));
        m = std::max(m, term);
      }
      slope = m;
    }
  }
  if (slope <= 0.0) return kNoCflLimit;
  return dmin / slope;
}

/// One forward-Euler upwind step; rejects time steps above the CFL bound.
inline SaturationState explicit_step(const SaturationState& state, double dt,
                                     const FaceField& u,
                                     const FluidProps& props,
                                     double inlet_sat = 1.0,
                                     const CellField* q_inj = nullptr,
                                     const CellField* q_prod = nullptr,
                                     const std::optional<GravityData>& gravity =
                                         std::nullopt,
                                     const PermField* K = nullptr) {
  const CartesianGrid& g = state.s.grid;
  const double limit = cfl_dt(u, props, gravity, K);
  if (dt > limit * (1.0 + 1e-12))
    throw std::invalid_argument("explicit_step: dt exceeds the CFL bound");
  const double M = props.viscosity_ratio();
  FaceFluxes fx = viscous_fluxes(state.s, u, props, inlet_sat);
  std::vector<double> Gg;
  if (gravity && K) Gg = gravity_fluxes(state.s, props, *gravity, *K);

  SaturationState next;
  next.s = CellField(g);
  next.time = state.time;  // caller advances PVI bookkeeping
  FaceField probe(g);
  const double inv_v = dt / g.cell_volume();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int c = g.cell(i, j);
      double bal = fx.F[probe.xf(i + 1, j)] - fx.F[probe.xf(i, j)] +
                   fx.G[probe.yf(i, j + 1)] - fx.G[probe.yf(i, j)];
      if (!Gg.empty()) bal += Gg[probe.yf(i, j + 1)] - Gg[probe.yf(i, j)];
      double v = state.s[c] - inv_v * bal;
      if (q_inj) v += dt * (*q_inj)[c] * fractional_flow(inlet_sat, M).f;
      if (q_prod) v += dt * (*q_prod)[c] * fractional_flow(state.s[c], M).f;
      next.s[c] = std::min(1.0, std::max(0.0, v));
    }
  }
  return next;
}

}  // namespace mrcm
