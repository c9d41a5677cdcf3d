#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mrcm/darcy.hpp"

using namespace mrcm;

TEST_CASE("face transmissibility is the harmonic average") {
  CHECK(face_transmissibility(2.0, 2.0, 0.5, 0.1) ==
        Catch::Approx(0.5 * 2.0 / 0.1));
  // Harmonic mean of 1 and 3 is 1.5.
  CHECK(face_transmissibility(1.0, 3.0, 1.0, 1.0) == Catch::Approx(1.5));
  CHECK_THROWS_AS(face_transmissibility(0.0, 1.0, 1.0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("uniform slab reproduces the linear solution") {
  CartesianGrid g(8, 4, 1.0 / 8, 1.0 / 4);
  CellField k(g, 1.0), q(g);
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Dirichlet, 1.0);
  bc.set_side(Side::Right, BcType::Dirichlet, 0.0);
  EllipticSolution sol = solve_darcy(g, k, bc, q);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i)
      CHECK(sol.u.x(i, j) == Catch::Approx(1.0).epsilon(1e-12));
  for (double v : sol.u.uy) CHECK(std::abs(v) < 1e-12);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      CHECK(sol.p(i, j) == Catch::Approx(1.0 - g.xc(i)).epsilon(1e-12));
}

TEST_CASE("1D heterogeneous column matches the resistor-chain flux") {
  const int n = 12;
  CartesianGrid g(n, 1, 1.0 / n, 1.0);
  CellField k(g), q(g);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(0.1, 10.0);
  for (auto& v : k.values) v = dist(rng);
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Dirichlet, 1.0);
  bc.set_side(Side::Right, BcType::Dirichlet, 0.0);
  EllipticSolution sol = solve_darcy(g, k, bc, q);
  // Series resistances: half cell at each end, harmonic faces between.
  double R = 0.5 * g.dx / k[0] + 0.5 * g.dx / k[n - 1];
  for (int i = 1; i < n; ++i)
    R += g.dx * 0.5 * (1.0 / k[i - 1] + 1.0 / k[i]);
  const double flux = 1.0 / R;
  for (int i = 0; i <= n; ++i)
    CHECK(sol.u.x(i, 0) == Catch::Approx(flux).epsilon(1e-11));
}

TEST_CASE("divergence of the reconstructed velocity matches the source") {
  CartesianGrid g(10, 10, 0.1, 0.1);
  CellField k(g), q(g);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> kd(0.5, 5.0), qd(-1.0, 1.0);
  for (auto& v : k.values) v = kd(rng);
  for (auto& v : q.values) v = qd(rng);
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Dirichlet, 1.0);
  EllipticSolution sol = solve_darcy(g, k, bc, q);
  CellField div = divergence(sol.u);
  const double scale = std::max(1.0, sol.u.max_abs());
  for (int c = 0; c < div.size(); ++c)
    CHECK(std::abs(div[c] - q[c]) <= 1e-10 * scale);
}

TEST_CASE("Robin condition recovers Dirichlet as beta vanishes") {
  CartesianGrid g(6, 6, 1.0 / 6, 1.0 / 6);
  CellField k(g), q(g);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> kd(0.5, 3.0);
  for (auto& v : k.values) v = kd(rng);
  BoundarySpec dir = BoundarySpec::no_flow(g);
  dir.set_side(Side::Left, BcType::Dirichlet, 2.0);
  dir.set_side(Side::Right, BcType::Dirichlet, -1.0);
  EllipticSolution ref = solve_darcy(g, k, dir, q);

  BoundarySpec rob = dir;
  rob.set_side(Side::Left, BcType::Robin, 2.0, 1e-12);
  rob.set_side(Side::Right, BcType::Robin, -1.0, 1e-12);
  EllipticSolution sol = solve_darcy(g, k, rob, q);
  for (int c = 0; c < ref.p.size(); ++c)
    CHECK(sol.p[c] == Catch::Approx(ref.p[c]).epsilon(1e-8).margin(1e-8));
}

TEST_CASE("Robin data sampled from an exact solution reproduces it") {
  // Uniform slab, exact p = 1 - x, u = (1, 0).  Robin value on the left is
  // -beta*(u.n_out) + p = beta + 1; on the right it is -beta*1 + 0.
  CartesianGrid g(8, 3, 1.0 / 8, 1.0 / 3);
  CellField k(g, 1.0), q(g);
  const double beta = 0.7;
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Robin, beta + 1.0, beta);
  bc.set_side(Side::Right, BcType::Robin, -beta, beta);
  EllipticSolution sol = solve_darcy(g, k, bc, q);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i)
      CHECK(sol.u.x(i, j) == Catch::Approx(1.0).epsilon(1e-11));
  CHECK(sol.p(0, 0) == Catch::Approx(1.0 - g.xc(0)).epsilon(1e-11));
}

TEST_CASE("all-Neumann problems are gauged to zero mean pressure") {
  CartesianGrid g(5, 5, 0.2, 0.2);
  CellField k(g, 2.0), q(g);
  q(1, 1) = 25.0;   // injection
  q(3, 3) = -25.0;  // balancing production
  BoundarySpec bc = BoundarySpec::no_flow(g);
  DarcyOperator op(g, k, bc);
  CHECK(op.gauged());
  EllipticSolution sol = op.solve(bc, q);
  double mean = 0.0;
  for (int c = 0; c < sol.p.size(); ++c) mean += sol.p[c];
  CHECK(std::abs(mean / sol.p.size()) < 1e-10);
  CellField div = divergence(sol.u);
  for (int c = 0; c < div.size(); ++c)
    CHECK(std::abs(div[c] - q[c]) <= 1e-9 * sol.u.max_abs());
}

TEST_CASE("incompatible all-Neumann data is rejected") {
  CartesianGrid g(4, 4, 0.25, 0.25);
  CellField k(g, 1.0), q(g);
  q(0, 0) = 1.0;  // net injection with closed boundaries
  BoundarySpec bc = BoundarySpec::no_flow(g);
  DarcyOperator op(g, k, bc);
  CHECK_THROWS_WITH(op.solve(bc, q),
                    Catch::Matchers::ContainsSubstring("incompatible"));
}

TEST_CASE("assembled operator is symmetric") {
  CartesianGrid g(6, 4, 1.0 / 6, 0.25);
  CellField k(g);
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> kd(0.2, 8.0);
  for (auto& v : k.values) v = kd(rng);
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Dirichlet, 1.0);
  bc.set_side(Side::Top, BcType::Robin, 0.0, 0.5);
  DarcyOperator op(g, k, bc);
  const auto& A = op.matrix();
  Eigen::SparseMatrix<double> diff = A - Eigen::SparseMatrix<double>(A.transpose());
  CHECK(diff.coeffs().cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("solver demands a matching boundary structure") {
  CartesianGrid g(4, 4, 0.25, 0.25);
  CellField k(g, 1.0), q(g);
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Dirichlet, 1.0);
  DarcyOperator op(g, k, bc);
  BoundarySpec other = BoundarySpec::no_flow(g);
  CHECK_THROWS_AS(op.solve(other, q), std::invalid_argument);
  // Same structure, different values: fine.
  BoundarySpec vals = bc;
  vals.set_side(Side::Left, BcType::Dirichlet, 5.0);
  CHECK_NOTHROW(op.solve(vals, q));
}

TEST_CASE("prescribed Neumann influx appears in the velocity") {
  CartesianGrid g(6, 3, 1.0 / 6, 1.0 / 3);
  CellField k(g, 1.0), q(g);
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Neumann, -2.0);  // inflow of 2 toward +x
  bc.set_side(Side::Right, BcType::Dirichlet, 0.0);
  EllipticSolution sol = solve_darcy(g, k, bc, q);
  for (int j = 0; j < g.ny; ++j) {
    CHECK(sol.u.x(0, j) == Catch::Approx(2.0));
    CHECK(sol.u.x(g.nx, j) == Catch::Approx(2.0).epsilon(1e-11));
  }
}
