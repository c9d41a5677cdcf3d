#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mrcm/grid.hpp"

namespace mrcm {

/// Relative L1 error of a cell field against a reference:
/// sum |a - ref| / sum |ref|.
inline double rel_l1_error(const CellField& a, const CellField& ref) {
  if (a.size() != ref.size())
    throw std::invalid_argument("rel_l1_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (int c = 0; c < a.size(); ++c) {
    num += std::abs(a[c] - ref[c]);
    den += std::abs(ref[c]);
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

/// Relative L2 error of a velocity field against a reference, over all face
/// values: ||a - ref||_2 / ||ref||_2.
inline double rel_l2_flux_error(const FaceField& a, const FaceField& ref) {
  if (a.ux.size() != ref.ux.size() || a.uy.size() != ref.uy.size())
    throw std::invalid_argument("rel_l2_flux_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.ux.size(); ++k) {
    num += (a.ux[k] - ref.ux[k]) * (a.ux[k] - ref.ux[k]);
    den += ref.ux[k] * ref.ux[k];
  }
  for (std::size_t k = 0; k < a.uy.size(); ++k) {
    num += (a.uy[k] - ref.uy[k]) * (a.uy[k] - ref.uy[k]);
    den += ref.uy[k] * ref.uy[k];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

struct ErrorReport {
  double sat_l1_rel = 0.0;
  double flux_l2_rel = 0.0;
  /// Per-time saturation errors: L1 of the difference at each time divided
  /// by the maximum absolute reference value over all times.
  std::vector<double> sat_series;
  /// Per-time flux errors: L2 ratio at each time.
  std::vector<double> flux_series;
};

inline ErrorReport make_error_report(const CellField& s, const CellField& s_ref,
                                     const FaceField& u, const FaceField& u_ref) {
  ErrorReport r;
  r.sat_l1_rel = rel_l1_error(s, s_ref);
  r.flux_l2_rel = rel_l2_flux_error(u, u_ref);
  return r;
}

/// Time-series saturation metric: per snapshot, mean |a - ref| normalized by
/// the maximum absolute reference value over the whole series.
inline std::vector<double> sat_series_error(
    const std::vector<CellField>& a, const std::vector<CellField>& ref) {
  if (a.size() != ref.size())
    throw std::invalid_argument("sat_series_error: series length mismatch");
  double ref_max = 0.0;
  for (const auto& f : ref) ref_max = std::max(ref_max, f.max_abs());
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != ref[t].size())
      throw std::invalid_argument("sat_series_error: field size mismatch");
    double num = 0.0;
    for (int c = 0; c < a[t].size(); ++c) num += std::abs(a[t][c] - ref[t][c]);
    num /= a[t].size();
    out[t] = ref_max > 0.0 ? num / ref_max : (num == 0.0 ? 0.0 : INFINITY);
  }
  return out;
}

inline std::vector<double> flux_series_error(
    const std::vector<FaceField>& a, const std::vector<FaceField>& ref) {
  if (a.size() != ref.size())
    throw std::invalid_argument("flux_series_error: series length mismatch");
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t t = 0; t < a.size(); ++t)
    out[t] = rel_l2_flux_error(a[t], ref[t]);
  return out;
}

/// Least-squares slope of log(y) against log(x); points with y == 0 (exact
/// matches, e.g. self-references) are excluded.  Needs >= 2 surviving points.
inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("loglog_slope: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0)) throw std::invalid_argument("loglog_slope: x must be > 0");
    if (y[k] == 0.0) continue;
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2)
    throw std::invalid_argument("loglog_slope: fewer than 2 usable points");
  const double det = n * sxx - sx * sx;
  if (det == 0.0) throw std::invalid_argument("loglog_slope: degenerate x data");
  return (n * sxy - sx * sy) / det;
}

}  // namespace mrcm
