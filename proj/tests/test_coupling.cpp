#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrcm/coupling.hpp"
#include "mrcm/gaussian_field.hpp"

using namespace mrcm;

namespace {

/// Slab-driven problem: Neumann inflow on the left, zero Dirichlet on the
/// right, Gaussian permeability, water injected from the boundary.
FlowProblem slab_problem(int n, unsigned seed = 17, double inflow = 1.0) {
  FlowProblem prob;
  prob.grid = CartesianGrid(n, n, 1.0 / n, 1.0 / n);
  prob.K = gen_gaussian_field(prob.grid, seed, 1.5);
  prob.props = FluidProps::from_ratio(5.0);
  prob.bc = BoundarySpec::no_flow(prob.grid);
  prob.bc.set_side(Side::Left, BcType::Neumann, -inflow);
  prob.bc.set_side(Side::Right, BcType::Dirichlet, 0.0);
  prob.s0 = CellField(prob.grid);
  return prob;
}

RunConfigCore si_core(double dt, double T) {
  RunConfigCore core;
  core.scheme = Scheme::SI;
  core.sfi.si.dt = dt;
  core.sfi.si.T = T;
  return core;
}

}  // namespace

TEST_CASE("closed quiescent problems are fixed points") {
  FlowProblem prob;
  prob.grid = CartesianGrid(6, 6, 1.0 / 6, 1.0 / 6);
  prob.K = uniform_perm(prob.grid, 1.0);
  prob.props = FluidProps::from_ratio(2.0);
  prob.bc = BoundarySpec::no_flow(prob.grid);
  prob.s0 = CellField(prob.grid, 0.4);

  RunResult res = run(prob, si_core(0.1, 0.3));
  CHECK(res.completed);
  CHECK(res.ledger.size() == 3);
  for (int c = 0; c < prob.s0.size(); ++c)
    CHECK(res.final_state.s[c] == 0.4);
  CHECK(res.final_pressure.u.max_abs() < 1e-12);
  for (const auto& row : res.ledger) CHECK(row.newton_iterations == 0);
}

TEST_CASE("injection rate counts wells and boundary inflow") {
  FlowProblem prob = slab_problem(4, 3, 2.0);
  FaceField u(prob.grid);
  for (auto& v : u.ux) v = 2.0;  // uniform flow toward +x
  // Only the left boundary faces count as inflow: 4 faces * dy * 2.
  CHECK(injection_rate(prob, u) == Catch::Approx(2.0));
  prob.wells.entries.push_back({prob.grid.cell(1, 1), 0.5});
  prob.wells.entries.push_back({prob.grid.cell(2, 2), -0.5});  // not counted
  CHECK(injection_rate(prob, u) == Catch::Approx(2.5));

  // PVI conversion: pore volume is 1, so dt_phys = dt_pvi / Q.
  CHECK(physical_dt(prob, u, 0.4) == Catch::Approx(0.4 / 2.5));
  // Zero velocity: only the injection well still counts toward Q.
  CHECK(physical_dt(prob, FaceField(prob.grid), 0.4) == Catch::Approx(0.8));
  // Fully closed system: PVI time equals physical time.
  prob.wells.entries.clear();
  CHECK(physical_dt(prob, FaceField(prob.grid), 0.4) == 0.4);
}

TEST_CASE("single-step run advances exactly once") {
  FlowProblem prob = slab_problem(8);
  RunResult res = run(prob, si_core(0.05, 0.05));
  REQUIRE(res.completed);
  REQUIRE(res.ledger.size() == 1);
  CHECK(res.ledger[0].step == 1);
  CHECK(res.ledger[0].time == Catch::Approx(0.05));
  CHECK(res.final_state.time == Catch::Approx(0.05));
  // Water actually entered the domain.
  double total = 0.0;
  for (int c = 0; c < res.final_state.s.size(); ++c)
    total += res.final_state.s[c];
  CHECK(total > 0.0);
}

TEST_CASE("snapshots are captured at the requested times") {
  FlowProblem prob = slab_problem(8);
  RunConfigCore core = si_core(0.02, 0.08);
  core.sfi.si.snapshot_times = {0.04, 0.08};
  RunResult res = run(prob, core);
  REQUIRE(res.completed);
  REQUIRE(res.snapshots.size() == 2);
  CHECK(res.snapshots[0].time == Catch::Approx(0.04));
  CHECK(res.snapshots[1].time == Catch::Approx(0.08));
}

TEST_CASE("SFI with a single outer iteration reproduces SI bitwise") {
  FlowProblem prob = slab_problem(12, 29);
  RunConfigCore si = si_core(0.05, 0.15);
  RunConfigCore sfi = si;
  sfi.scheme = Scheme::SFI;
  sfi.sfi.outer_cap = 1;

  RunResult a = run(prob, si);
  RunResult b = run(prob, sfi);
  REQUIRE(a.completed);
  REQUIRE(b.completed);
  CHECK(a.final_state.s.values == b.final_state.s.values);
  CHECK(a.final_pressure.u.ux == b.final_pressure.u.ux);
  CHECK(a.final_pressure.u.uy == b.final_pressure.u.uy);
  for (const auto& row : b.ledger) CHECK(row.outer_iterations == 1);
}

TEST_CASE("SFI converges the outer loop and tightens the coupling") {
  FlowProblem prob = slab_problem(12, 29);
  RunConfigCore core = si_core(0.05, 0.15);
  core.scheme = Scheme::SFI;
  core.sfi.outer_tol = 1e-6;
  RunResult res = run(prob, core);
  REQUIRE(res.completed);
  for (const auto& row : res.ledger) {
    CHECK(row.outer_iterations >= 2);  // convergence is tested from k = 2
    CHECK(row.outer_iterations <= core.sfi.outer_cap);
  }
}

TEST_CASE("a failed transport solve aborts the run with a partial ledger") {
  FlowProblem prob = slab_problem(10, 41, 4.0);
  RunConfigCore core = si_core(0.2, 0.4);
  core.sfi.si.newton.strategy = NewtonStrategy::Plain;
  core.sfi.si.newton.max_iterations = 1;
  core.sfi.si.newton.eta = 1e-12;
  RunResult res = run(prob, core);
  CHECK_FALSE(res.completed);
  CHECK(res.ledger.empty());
  // The returned state is the last good one.
  CHECK(res.final_state.time == 0.0);
}

TEST_CASE("all-Neumann problems demand balanced sources") {
  FlowProblem prob;
  prob.grid = CartesianGrid(4, 4, 0.25, 0.25);
  prob.K = uniform_perm(prob.grid, 1.0);
  prob.props = FluidProps::from_ratio(2.0);
  prob.bc = BoundarySpec::no_flow(prob.grid);
  prob.s0 = CellField(prob.grid);
  prob.wells.entries.push_back({prob.grid.cell(0, 0), 1.0});
  CHECK_THROWS_WITH(prob.validate(),
                    Catch::Matchers::ContainsSubstring("balanced"));
  prob.wells.entries.push_back({prob.grid.cell(3, 3), -1.0});
  CHECK_NOTHROW(prob.validate());
  prob.s0[5] = 1.5;
  CHECK_THROWS_AS(prob.validate(), std::domain_error);
}

TEST_CASE("well source fields split by sign in divergence units") {
  FlowProblem prob;
  prob.grid = CartesianGrid(2, 2, 0.5, 0.5);
  prob.K = uniform_perm(prob.grid, 1.0);
  prob.bc = BoundarySpec::no_flow(prob.grid);
  prob.s0 = CellField(prob.grid);
  prob.wells.entries.push_back({0, 1.0});
  prob.wells.entries.push_back({3, -1.0});
  CHECK(prob.injection_field()[0] == Catch::Approx(1.0 / 0.25));
  CHECK(prob.injection_field()[3] == 0.0);
  CHECK(prob.production_field()[3] == Catch::Approx(-1.0 / 0.25));
  CHECK(prob.total_source_field()[0] + prob.total_source_field()[3] ==
        Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("reference scales obey their defining identities") {
  DimensionlessScales sc = make_scales(182.88, 1e-5, 1e-12, 3e-4, 1000.0);
  CHECK(sc.p_ref == Catch::Approx(182.88 * 3e-4 * 1e-5 / 1e-12));
  CHECK(sc.g_ref == Catch::Approx(3.0));
  CHECK_NOTHROW(sc.validate());
  sc.p_ref *= 1.5;
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_scales(-1.0, 1.0, 1.0, 1.0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("unit transform round trips and maps gravity correctly") {
  FlowProblem prob;
  prob.grid = CartesianGrid(5, 4, 36.576, 45.72, 10.0, -5.0);
  prob.K = CellField(prob.grid);
  for (int c = 0; c < prob.K.size(); ++c) prob.K[c] = 1e-12 * (0.1 + 0.05 * c);
  prob.props = FluidProps(3e-4, 3e-3, 1000.0, 800.0);
  prob.bc = BoundarySpec::no_flow(prob.grid);
  prob.bc.set_side(Side::Left, BcType::Neumann, -1e-5);
  prob.bc.set_side(Side::Right, BcType::Dirichlet, 2.5e5);
  prob.bc.set_side(Side::Top, BcType::Robin, 1e5, 1e9);
  prob.s0 = CellField(prob.grid, 0.2);
  prob.wells.entries.push_back({3, 1e-4});
  prob.gravity = GravityData{9.80665, -1};

  DimensionlessScales sc = make_scales(182.88, 1e-5, 1e-12, 3e-4, 1000.0);
  FlowProblem nd = nondimensionalize(prob, sc);
  CHECK(nd.grid.dx == Catch::Approx(36.576 / 182.88).epsilon(1e-14));
  CHECK(nd.props.mu_w == Catch::Approx(1.0));
  CHECK(nd.props.rho_o == Catch::Approx(0.8));
  CHECK(nd.gravity->g == Catch::Approx(9.80665 / 3.0).epsilon(1e-14));
  CHECK(nd.bc.left[0].value == Catch::Approx(-1.0));
  CHECK(nd.bc.right[0].value == Catch::Approx(2.5e5 / sc.p_ref));
  CHECK(nd.bc.top[0].beta ==
        Catch::Approx(1e9 * sc.u_ref / sc.p_ref).epsilon(1e-14));
  CHECK(nd.wells.entries[0].rate ==
        Catch::Approx(1e-4 / (sc.u_ref * sc.L)).epsilon(1e-14));

  FlowProblem back = redimensionalize(nd, sc);
  CHECK(back.grid.dx == Catch::Approx(prob.grid.dx).epsilon(1e-14));
  CHECK(back.grid.x0 == Catch::Approx(prob.grid.x0).epsilon(1e-14));
  for (int c = 0; c < prob.K.size(); ++c)
    CHECK(back.K[c] == Catch::Approx(prob.K[c]).epsilon(1e-14));
  CHECK(back.props.mu_o == Catch::Approx(prob.props.mu_o).epsilon(1e-14));
  CHECK(back.gravity->g == Catch::Approx(prob.gravity->g).epsilon(1e-14));
  CHECK(back.bc.top[0].beta == Catch::Approx(1e9).epsilon(1e-14));
  CHECK(back.wells.entries[0].rate == Catch::Approx(1e-4).epsilon(1e-14));

  // Identity scales leave the problem untouched.
  FlowProblem same = nondimensionalize(prob, DimensionlessScales{});
  CHECK(same.K.values == prob.K.values);
  CHECK(same.bc.right[0].value == prob.bc.right[0].value);
}

TEST_CASE("multiscale backend drives the coupled run") {
  FlowProblem prob = slab_problem(16, 53);
  RunConfigCore fine = si_core(0.05, 0.1);
  RunConfigCore multi = fine;
  multi.sfi.si.backend = VelocityBackend::Mrcm;
  multi.sfi.si.mrcm.mx = 2;
  multi.sfi.si.mrcm.my = 2;
  multi.sfi.si.mrcm.space = InterfaceSpaceKind::FullTrace;

  RunResult a = run(prob, fine);
  RunResult b = run(prob, multi);
  REQUIRE(a.completed);
  REQUIRE(b.completed);
  // Full-trace spaces make the multiscale velocity equivalent to the fine
  // one, so the transported saturations agree tightly.
  for (int c = 0; c < a.final_state.s.size(); ++c)
    CHECK(b.final_state.s[c] == Catch::Approx(a.final_state.s[c]).margin(1e-7));
}
