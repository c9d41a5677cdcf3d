#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mrcm/gaussian_field.hpp"
#include "mrcm/interface_space.hpp"
#include "mrcm/metrics.hpp"
#include "mrcm/mrcm.hpp"

using namespace mrcm;

namespace {

SkeletonDecomposition demo_decomp(int n = 16, int m = 2) {
  CartesianGrid g(n, n, 1.0 / n, 1.0 / n);
  return build_decomposition(g, m, m);
}

BoundarySpec slab_bc(const CartesianGrid& g) {
  BoundarySpec bc = BoundarySpec::no_flow(g);
  bc.set_side(Side::Left, BcType::Dirichlet, 1.0);
  bc.set_side(Side::Right, BcType::Dirichlet, 0.0);
  return bc;
}

}  // namespace

TEST_CASE("polynomial interface spaces are orthonormal") {
  SkeletonDecomposition d = demo_decomp();
  InterfaceSpace p0 = build_polynomial_space(d, 0);
  InterfaceSpace p1 = build_polynomial_space(d, 1);
  CHECK(p0.total_dofs() == static_cast<int>(d.interfaces.size()));
  CHECK(p1.total_dofs() == 2 * static_cast<int>(d.interfaces.size()));
  CHECK_THROWS_AS(build_polynomial_space(d, 2), std::invalid_argument);
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    const auto& basis = p1.basis[k];
    for (std::size_t a = 0; a < basis.size(); ++a)
      for (std::size_t b = 0; b < basis.size(); ++b) {
        double dot = 0.0;
        for (std::size_t e = 0; e < basis[a].size(); ++e)
          dot += basis[a][e] * basis[b][e];
        CHECK(dot == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-12));
      }
  }
}

TEST_CASE("full trace space has one indicator per fine edge") {
  SkeletonDecomposition d = demo_decomp(8, 2);
  InterfaceSpace full = build_full_trace_space(d);
  for (std::size_t k = 0; k < d.interfaces.size(); ++k)
    CHECK(full.dofs_on(static_cast<int>(k)) == d.interfaces[k].num_edges());
}

TEST_CASE("structure detection finds contiguous channel runs") {
  CartesianGrid g(8, 8, 0.125, 0.125);
  PermField k = uniform_perm(g, 1.0);
  // High conductivity in rows j = 2,3 crossing the vertical interface.
  for (int j = 2; j <= 3; ++j)
    for (int i = 0; i < 8; ++i) k(i, j) = 1e4;
  // Low conductivity in row 6.
  for (int i = 0; i < 8; ++i) k(i, 6) = 1e-4;
  SkeletonDecomposition d = build_decomposition(g, 2, 1);
  ChannelMap map = detect_structures(k, d.interfaces[0], 10.0, 10.0);
  REQUIRE(map.high.size() == 1);
  CHECK(map.high[0] == std::pair<int, int>{2, 3});
  REQUIRE(map.low.size() == 1);
  CHECK(map.low[0] == std::pair<int, int>{6, 6});
  CHECK_THROWS_AS(detect_structures(k, d.interfaces[0], 1.0, 10.0),
                  std::invalid_argument);
}

TEST_CASE("physics pressure basis is a partition of unity") {
  CartesianGrid g(16, 16, 1.0 / 16, 1.0 / 16);
  SkeletonDecomposition d = build_decomposition(g, 2, 1);
  const Interface& f = d.interfaces[0];  // 16 edges
  ChannelMap map;
  map.high = {{4, 6}, {10, 11}};
  auto basis = build_physics_pressure_space(f, map);
  // 2 ramps + one plateau hat per channel.
  CHECK(basis.size() == 2 + map.high.size());
  for (int e = 0; e < f.num_edges(); ++e) {
    double sum = 0.0;
    for (const auto& v : basis) sum += v[e];
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
  // Plateaus are flat at one over their support.
  CHECK(basis[1][4] == 1.0);
  CHECK(basis[1][6] == 1.0);
  CHECK(basis[2][10] == 1.0);
}

TEST_CASE("physics pressure basis degenerates to ramps without channels") {
  SkeletonDecomposition d = demo_decomp(8, 2);
  auto basis = build_physics_pressure_space(d.interfaces[0], ChannelMap{});
  REQUIRE(basis.size() == 2);
  for (int e = 0; e < d.interfaces[0].num_edges(); ++e)
    CHECK(basis[0][e] + basis[1][e] == Catch::Approx(1.0));
}

TEST_CASE("physics flux basis covers barriers and gaps disjointly") {
  CartesianGrid g(16, 16, 1.0 / 16, 1.0 / 16);
  SkeletonDecomposition d = build_decomposition(g, 2, 1);
  const Interface& f = d.interfaces[0];  // 16 edges
  ChannelMap map;
  map.low = {{3, 5}, {9, 10}};
  auto basis = build_physics_flux_space(f, map);
  // 1 + 2 * N_low indicators when no barrier touches an interface end.
  CHECK(basis.size() == 1 + 2 * map.low.size());
  for (int e = 0; e < f.num_edges(); ++e) {
    double sum = 0.0;
    for (const auto& v : basis) {
      CHECK((v[e] == 0.0 || v[e] == 1.0));
      sum += v[e];
    }
    CHECK(sum == 1.0);  // disjoint cover
  }
}

TEST_CASE("adaptive alpha marks high-permeability supports") {
  SkeletonDecomposition d = demo_decomp(8, 2);
  std::vector<ChannelMap> maps(d.interfaces.size());
  maps[0].high = {{1, 2}};
  RobinParamField p = adaptive_alpha(d, maps, 1e-2, 1e2);
  CHECK(p.alpha[0][0] == 1e2);
  CHECK(p.alpha[0][1] == 1e-2);
  CHECK(p.alpha[0][2] == 1e-2);
  CHECK(p.alpha[1][0] == 1e2);
  CHECK_THROWS_AS(adaptive_alpha(d, maps, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("full-trace spaces reproduce the fine solution") {
  CartesianGrid g(16, 16, 1.0 / 16, 1.0 / 16);
  PermField k = gen_gaussian_field(g, 31, 1.5);
  CellField q(g);
  BoundarySpec bc = slab_bc(g);
  SkeletonDecomposition d = build_decomposition(g, 2, 2);
  MrcmSpaces sp{build_full_trace_space(d), build_full_trace_space(d)};
  RobinParamField alpha = RobinParamField::uniform(d, 1.0);

  MrcmSolution ms = assemble_and_solve_mrcm(d, k, bc, q, sp, alpha);
  EllipticSolution fine = solve_darcy(g, k, bc, q);
  FaceField stitched = downscale_stitch(ms, d, k, bc, q);
  CHECK(rel_l2_flux_error(stitched, fine.u) < 1e-8);
}

TEST_CASE("compatibility residuals vanish after the global solve") {
  CartesianGrid g(12, 12, 1.0 / 12, 1.0 / 12);
  PermField k = gen_gaussian_field(g, 77, 2.0);
  CellField q(g);
  BoundarySpec bc = slab_bc(g);
  SkeletonDecomposition d = build_decomposition(g, 3, 2);
  for (int degree : {0, 1}) {
    MrcmSpaces sp{build_polynomial_space(d, degree),
                  build_polynomial_space(d, degree)};
    RobinParamField alpha = RobinParamField::uniform(d, 1.0);
    MrcmSolution ms = assemble_and_solve_mrcm(d, k, bc, q, sp, alpha);
    CompatibilityResiduals res = mrcm_compatibility(ms, d, sp);
    INFO("degree " << degree);
    CHECK(res.flux_jump_rel <= 1e-9);
    CHECK(res.robin_jump_rel <= 1e-9);
  }
}

TEST_CASE("stitched velocity is conservative with coarse spaces") {
  CartesianGrid g(16, 16, 1.0 / 16, 1.0 / 16);
  PermField k = gen_gaussian_field(g, 5, 2.5);
  CellField q(g);
  q(2, 2) = 64.0;
  q(13, 13) = -64.0;
  BoundarySpec bc = slab_bc(g);
  SkeletonDecomposition d = build_decomposition(g, 4, 4);
  MrcmSpaces sp{build_polynomial_space(d, 1), build_polynomial_space(d, 0)};
  RobinParamField alpha = RobinParamField::uniform(d, 1.0);
  MrcmSolution ms = assemble_and_solve_mrcm(d, k, bc, q, sp, alpha);
  FaceField u = downscale_stitch(ms, d, k, bc, q);
  CellField div = divergence(u);
  const double scale = u.max_abs();
  for (int c = 0; c < div.size(); ++c)
    CHECK(std::abs(div[c] - q[c]) <= 1e-9 * scale);
}

TEST_CASE("trivial single-subdomain decomposition is the fine solve") {
  CartesianGrid g(8, 8, 0.125, 0.125);
  PermField k = gen_gaussian_field(g, 2, 1.0);
  CellField q(g);
  BoundarySpec bc = slab_bc(g);
  SkeletonDecomposition d = build_decomposition(g, 1, 1);
  MrcmSpaces sp{build_polynomial_space(d, 1), build_polynomial_space(d, 1)};
  RobinParamField alpha = RobinParamField::uniform(d, 1.0);
  MrcmSolution ms = assemble_and_solve_mrcm(d, k, bc, q, sp, alpha);
  EllipticSolution fine = solve_darcy(g, k, bc, q);
  CHECK(rel_l2_flux_error(ms.locals[0].u, fine.u) < 1e-12);
}

TEST_CASE("physics-based builder falls back to linears") {
  CartesianGrid g(16, 16, 1.0 / 16, 1.0 / 16);
  PermField k = uniform_perm(g, 1.0);  // no structures anywhere
  SkeletonDecomposition d = build_decomposition(g, 2, 2);
  auto [sp, maps] = build_physics_based_spaces(d, k);
  for (std::size_t i = 0; i < d.interfaces.size(); ++i) {
    CHECK(maps[i].high.empty());
    CHECK(maps[i].low.empty());
    CHECK(sp.pressure.dofs_on(static_cast<int>(i)) == 2);
    CHECK(sp.flux.dofs_on(static_cast<int>(i)) == 2);
  }
}
