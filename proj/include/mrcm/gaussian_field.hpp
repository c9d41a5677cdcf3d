#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mrcm/grid.hpp"
#include "mrcm/perm.hpp"

namespace mrcm {

namespace detail {

/// Draws a stationary Gaussian sample with covariance C(r) = r^(-1/2) on the
/// grid by circulant embedding on the doubled torus.  The singular zero-lag
/// covariance is replaced by the nearest-neighbor value; negative embedding
/// eigenvalues (the power-law kernel is not exactly embeddable) are clamped
/// to zero.
inline std::vector<double> self_similar_gaussian(const CartesianGrid& g,
                                                 std::uint64_t seed) {
  const int Nx = 2 * g.nx, Ny = 2 * g.ny;
  const std::size_t n = static_cast<std::size_t>(Nx) * Ny;

  std::vector<double> cov(n);
  const double c0 = 1.0 / std::sqrt(std::min(g.dx, g.dy));
  for (int j = 0; j < Ny; ++j) {
    const int jm = std::min(j, Ny - j);
    for (int i = 0; i < Nx; ++i) {
      const int im = std::min(i, Nx - i);
      const double r = std::hypot(im * g.dx, jm * g.dy);
      cov[static_cast<std::size_t>(j) * Nx + i] =
          (r > 0.0) ? 1.0 / std::sqrt(r) : c0;
    }
  }

  fftw_complex* buf = fftw_alloc_complex(n);
  fftw_plan fwd = fftw_plan_dft_2d(Ny, Nx, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_2d(Ny, Nx, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);

  for (std::size_t k = 0; k < n; ++k) {
    buf[k][0] = cov[k];
    buf[k][1] = 0.0;
  }
  fftw_execute(fwd);
  std::vector<double> eig(n);
  for (std::size_t k = 0; k < n; ++k) eig[k] = std::max(buf[k][0], 0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::sqrt(eig[k] / static_cast<double>(n));
    buf[k][0] = a * normal(rng);
    buf[k][1] = a * normal(rng);
  }
  fftw_execute(bwd);

  std::vector<double> xi(static_cast<std::size_t>(g.num_cells()));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      xi[static_cast<std::size_t>(j) * g.nx + i] =
          buf[static_cast<std::size_t>(j) * Nx + i][0];

  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  fftw_free(buf);
  return xi;
}

}  // namespace detail

/// K = exp(scale_exponent * xi), with xi a zero-mean, unit-variance sample
/// of the self-similar Gaussian field.  Deterministic per seed.
inline PermField gen_gaussian_field(const CartesianGrid& grid,
                                    std::uint64_t seed,
                                    double scale_exponent = 4.5) {
  std::vector<double> xi = detail::self_similar_gaussian(grid, seed);
  const double n = static_cast<double>(xi.size());
  double mean = 0.0;
  for (double v : xi) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : xi) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_sd = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;

  PermField k(grid);
  for (std::size_t c = 0; c < xi.size(); ++c)
    k.values[c] = std::exp(scale_exponent * (xi[c] - mean) * inv_sd);
  return k;
}

}  // namespace mrcm
