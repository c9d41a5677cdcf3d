#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mrcm/transport.hpp"

using namespace mrcm;

namespace {

FaceField uniform_flow(const CartesianGrid& g, double ux_val) {
  FaceField u(g);
  for (auto& v : u.ux) v = ux_val;
  return u;
}

}  // namespace

TEST_CASE("viscous fluxes upwind by velocity sign") {
  CartesianGrid g(3, 1, 1.0 / 3, 1.0);
  CellField s(g);
  s(0, 0) = 0.8;
  s(1, 0) = 0.2;
  s(2, 0) = 0.5;
  FluidProps props = FluidProps::from_ratio(2.0);
  const double M = 2.0;

  FaceFluxes fwd = viscous_fluxes(s, uniform_flow(g, 1.0), props, 1.0);
  // Interior face between cells 0 and 1 takes the left (donor) saturation.
  FaceField probe(g);
  CHECK(fwd.F[probe.xf(1, 0)] ==
        Catch::Approx(g.dy * fractional_flow(0.8, M).f));
  // Inlet face uses the inlet saturation.
  CHECK(fwd.F[probe.xf(0, 0)] ==
        Catch::Approx(g.dy * fractional_flow(1.0, M).f));

  FaceFluxes bwd = viscous_fluxes(s, uniform_flow(g, -1.0), props, 0.9);
  CHECK(bwd.F[probe.xf(1, 0)] ==
        Catch::Approx(-g.dy * fractional_flow(0.2, M).f));
  // Right boundary face becomes the inflow side.
  CHECK(bwd.F[probe.xf(3, 0)] ==
        Catch::Approx(-g.dy * fractional_flow(0.9, M).f));
}

TEST_CASE("gravity fluxes vanish for equal densities and on boundaries") {
  CartesianGrid g(4, 5, 0.25, 0.2);
  CellField s(g, 0.5);
  PermField K(g, 2.0);
  FluidProps equal(1.0, 2.0, 900.0, 900.0);
  GravityData grav{9.81, -1};
  auto G = gravity_fluxes(s, equal, grav, K);
  for (double v : G) CHECK(v == 0.0);

  FluidProps heavy(1.0, 2.0, 1000.0, 800.0);
  auto G2 = gravity_fluxes(s, heavy, grav, K);
  FaceField probe(g);
  for (int i = 0; i < g.nx; ++i) {
    CHECK(G2[probe.yf(i, 0)] == 0.0);
    CHECK(G2[probe.yf(i, g.ny)] == 0.0);
  }
  // Water sinks: the upward water flux through interior faces is negative.
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) CHECK(G2[probe.yf(i, j)] < 0.0);
}

TEST_CASE("gravity flux uses the harmonic permeability average") {
  CartesianGrid g(1, 2, 1.0, 1.0);
  CellField s(g, 0.5);
  PermField K(g);
  K[0] = 1.0;
  K[1] = 3.0;
  FluidProps props(1.0, 1.0, 2.0, 1.0);
  GravityData grav{1.0, -1};
  auto G = gravity_fluxes(s, props, grav, K);
  FaceField probe(g);
  const Mobilities m = mobilities(0.5, props);
  const double expect =
      g.dx * 1.5 * (m.lam_w * m.lam_o / (m.lam_w + m.lam_o)) * (2.0 - 1.0) *
      1.0 * (-1);
  CHECK(G[probe.yf(0, 1)] == Catch::Approx(expect));
}

TEST_CASE("transport Jacobian matches finite differences") {
  CartesianGrid g(6, 5, 1.0 / 6, 0.2);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> sd(0.02, 0.98), ud(-1.0, 1.0);

  TransportOperator op;
  op.grid = g;
  op.u = FaceField(g);
  for (auto& v : op.u.ux) v = ud(rng);
  for (auto& v : op.u.uy) v = ud(rng);
  op.props = FluidProps(1.0, 5.0, 1000.0, 800.0);
  op.inlet_sat = 1.0;
  op.q_inj = CellField(g);
  op.q_prod = CellField(g);
  op.q_inj(0, 0) = 2.0;
  op.q_prod(5, 4) = -2.0;
  op.K = PermField(g, 1.0);

  CellField s_prev(g, 0.3);
  const double dt = 0.05;
  for (bool with_gravity : {false, true}) {
    op.gravity = with_gravity ? std::optional<GravityData>(GravityData{5.0, -1})
                              : std::nullopt;
    CellField s(g);
    for (auto& v : s.values) v = sd(rng);
    auto J = op.jacobian(s_prev, s, dt);
    Eigen::MatrixXd Jd = Eigen::MatrixXd(J);
    const double h = 1e-7;
    double max_rel = 0.0;
    for (int c = 0; c < g.num_cells(); ++c) {
      CellField sp = s, sm = s;
      sp[c] += h;
      sm[c] -= h;
      CellField rp = op.residual(s_prev, sp, dt);
      CellField rm = op.residual(s_prev, sm, dt);
      for (int r = 0; r < g.num_cells(); ++r) {
        const double fd = (rp[r] - rm[r]) / (2 * h);
        const double an = Jd(r, c);
        const double denom = std::max(1.0, std::abs(an));
        max_rel = std::max(max_rel, std::abs(fd - an) / denom);
      }
    }
    CHECK(max_rel < 1e-6);
  }
}

TEST_CASE("CFL bound matches a dense sampling oracle without gravity") {
  CartesianGrid g(20, 1, 0.05, 1.0);
  FaceField u = uniform_flow(g, 1.5);
  FluidProps props = FluidProps::from_ratio(4.0);
  const double dt = cfl_dt(u, props);
  double max_df = 0.0;
  for (int k = 0; k <= 100000; ++k)
    max_df = std::max(max_df, fractional_flow(k / 100000.0, 4.0).df);
  CHECK(dt == Catch::Approx(0.05 / (1.5 * max_df)).epsilon(1e-6));
  // Zero velocity: no restriction.
  CHECK(cfl_dt(FaceField(g), props) == kNoCflLimit);
}

TEST_CASE("gravity CFL envelope bounds the sampled total flux slope") {
  CartesianGrid g(10, 10, 0.1, 0.1);
  FaceField u = uniform_flow(g, 1.0);
  PermField K(g, 0.5);
  GravityData grav{3.0, -1};
  for (double M : {2.0, 5.0, 10.0}) {
    FluidProps props(1.0, M, 1000.0, 800.0);
    const double dt = cfl_dt(u, props, grav, &K);
    const double bound = std::min(g.dx, g.dy) / dt;  // implied slope
    // Densely sample |d/ds [f (u + K lam_o drho g)]|.
    const double drho_g = (props.rho_w - props.rho_o) * grav.g;
    double m = 0.0;
    const int ns = 50000;
    for (int k = 0; k <= ns; ++k) {
      const double s = static_cast<double>(k) / ns;
      const FracFlow ff = fractional_flow(s, M);
      const Mobilities mb = mobilities(s, props);
      const double slope = ff.df * 1.0 + 0.5 * drho_g *
                           (ff.df * mb.lam_o + ff.f * mb.dlam_o);
      m = std::max(m, std::abs(slope));
    }
    CHECK(m <= bound * (1.0 + 1e-12));
  }
}

TEST_CASE("explicit step rejects time steps above the CFL bound") {
  CartesianGrid g(10, 1, 0.1, 1.0);
  FaceField u = uniform_flow(g, 1.0);
  FluidProps props = FluidProps::from_ratio(2.0);
  SaturationState st{CellField(g), 0.0};
  const double limit = cfl_dt(u, props);
  CHECK_NOTHROW(explicit_step(st, 0.99 * limit, u, props));
  CHECK_THROWS_AS(explicit_step(st, 1.01 * limit, u, props),
                  std::invalid_argument);
}

TEST_CASE("explicit and implicit steps agree at small dt") {
  CartesianGrid g(20, 1, 0.05, 1.0);
  FaceField u = uniform_flow(g, 1.0);
  FluidProps props = FluidProps::from_ratio(3.0);
  CellField s0(g);
  const double dt = 0.2 * cfl_dt(u, props);

  SaturationState ex{s0, 0.0};
  ex = explicit_step(ex, dt, u, props);

  TransportOperator op;
  op.grid = g;
  op.u = u;
  op.props = props;
  op.K = PermField(g, 1.0);
  CellField s = s0;
  // A few plain Newton iterations on the implicit residual.
  for (int it = 0; it < 12; ++it) {
    CellField r = op.residual(s0, s, dt);
    auto J = op.jacobian(s0, s, dt);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
    Eigen::VectorXd rhs(g.num_cells());
    for (int c = 0; c < g.num_cells(); ++c) rhs[c] = -r[c];
    Eigen::VectorXd d = lu.solve(rhs);
    for (int c = 0; c < g.num_cells(); ++c)
      s[c] = std::clamp(s[c] + d[c], 0.0, 1.0);
  }
  for (int c = 0; c < g.num_cells(); ++c)
    CHECK(s[c] == Catch::Approx(ex.s[c]).margin(5e-3));
}

TEST_CASE("explicit transport tracks the analytic shock speed") {
  // Buckley-Leverett with unit total velocity and s = 1 injected: the shock
  // saturation satisfies f'(s_f) = f(s_f)/s_f and travels at that speed.
  const double M = 2.0;
  auto shock_sat = [&]() {
    double lo = 1e-3, hi = 1.0 - 1e-3;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const FracFlow ff = fractional_flow(mid, M);
      (ff.df - ff.f / mid > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double sf = shock_sat();
  const double speed = fractional_flow(sf, M).f / sf;

  CartesianGrid g(200, 1, 1.0 / 200, 1.0);
  FaceField u = uniform_flow(g, 1.0);
  FluidProps props = FluidProps::from_ratio(M);
  SaturationState st{CellField(g), 0.0};
  const double dt = 0.9 * cfl_dt(u, props);
  const double T = 0.3;
  const int n = static_cast<int>(T / dt);
  for (int k = 0; k < n; ++k) st = explicit_step(st, dt, u, props);

  // Front position: first cell from the right with s above half the shock.
  int front = 0;
  for (int i = 0; i < g.nx; ++i)
    if (st.s(i, 0) > 0.5 * sf) front = i;
  const double x_front = g.xc(front);
  CHECK(x_front == Catch::Approx(speed * n * dt).margin(0.03));
}
