#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrcm/decomposition.hpp"
#include "mrcm/perm.hpp"

namespace mrcm {

/// Basis vectors per interface; each vector assigns one value per fine edge
/// (piecewise-constant trace functions).
struct InterfaceSpace {
  /// basis[interface_id][vector][edge]
  std::vector<std::vector<std::vector<double>>> basis;

  int total_dofs() const {
    int n = 0;
    for (const auto& b : basis) n += static_cast<int>(b.size());
    return n;
  }
  int dofs_on(int interface_id) const {
    return static_cast<int>(basis[interface_id].size());
  }
};

/// Pressure and flux trial/test spaces over the same skeleton.
struct MrcmSpaces {
  InterfaceSpace pressure;
  InterfaceSpace flux;
};

namespace detail {

inline void orthonormalize(std::vector<std::vector<double>>& vecs) {
  std::vector<std::vector<double>> out;
  for (auto v : vecs) {
    for (const auto& u : out) {
      double dot = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) dot += v[k] * u[k];
      for (std::size_t k = 0; k < v.size(); ++k) v[k] -= dot * u[k];
    }
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm > 1e-12) {
      for (double& x : v) x /= nrm;
      out.push_back(std::move(v));
    }
  }
  vecs = std::move(out);
}

}  // namespace detail

/// Piecewise-polynomial interface space of the given degree (0 or 1),
/// orthonormalized per interface.  Degree 1 adds the edge-midpoint-sampled
/// linear, which has zero mean after orthogonalization.
inline InterfaceSpace build_polynomial_space(const SkeletonDecomposition& d,
                                             int degree) {
  if (degree < 0 || degree > 1)
    throw std::invalid_argument("build_polynomial_space: degree must be 0 or 1");
  InterfaceSpace sp;
  sp.basis.resize(d.interfaces.size());
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    const Interface& f = d.interfaces[k];
    const int ne = f.num_edges();
    std::vector<std::vector<double>> vecs;
    vecs.emplace_back(ne, 1.0);
    if (degree >= 1) {
      std::vector<double> lin(ne);
      for (int e = 0; e < ne; ++e) lin[e] = f.midpoint(e);
      vecs.push_back(std::move(lin));
    }
    detail::orthonormalize(vecs);
    sp.basis[k] = std::move(vecs);
  }
  return sp;
}

/// One indicator per fine edge; spans the full trace space.
inline InterfaceSpace build_full_trace_space(const SkeletonDecomposition& d) {
  InterfaceSpace sp;
  sp.basis.resize(d.interfaces.size());
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    const int ne = d.interfaces[k].num_edges();
    sp.basis[k].resize(ne);
    for (int e = 0; e < ne; ++e) {
      sp.basis[k][e].assign(ne, 0.0);
      sp.basis[k][e][e] = 1.0;
    }
  }
  return sp;
}

/// Detected structure supports on one interface, as inclusive fine-edge
/// index ranges.
struct ChannelMap {
  std::vector<std::pair<int, int>> high;
  std::vector<std::pair<int, int>> low;
};

/// Classifies interface edges by the harmonic mean of the two adjacent cell
/// permeabilities against the geometric mean over the interface, then merges
/// contiguous runs.
inline ChannelMap detect_structures(const PermField& perm, const Interface& f,
                                    double hi_factor, double lo_factor) {
  if (!(hi_factor > 1.0) || !(lo_factor > 1.0))
    throw std::invalid_argument("detect_structures: factors must exceed 1");
  const int ne = f.num_edges();
  std::vector<double> kh(ne);
  double log_sum = 0.0;
  for (int e = 0; e < ne; ++e) {
    const double a = perm[f.cells_lo[e]], b = perm[f.cells_hi[e]];
    kh[e] = 2.0 * a * b / (a + b);
    log_sum += std::log(kh[e]);
  }
  const double geo = std::exp(log_sum / ne);

  auto merge_runs = [ne](const std::vector<bool>& flag) {
    std::vector<std::pair<int, int>> runs;
    int start = -1;
    for (int e = 0; e <= ne; ++e) {
      const bool on = e < ne && flag[e];
      if (on && start < 0) start = e;
      if (!on && start >= 0) {
        runs.emplace_back(start, e - 1);
        start = -1;
      }
    }
    return runs;
  };

  std::vector<bool> hi(ne), lo(ne);
  for (int e = 0; e < ne; ++e) {
    hi[e] = kh[e] > hi_factor * geo;
    lo[e] = kh[e] < geo / lo_factor;
  }
  ChannelMap map;
  map.high = merge_runs(hi);
  map.low = merge_runs(lo);
  return map;
}

namespace detail {

inline void check_supports(const std::vector<std::pair<int, int>>& sup,
                           int ne) {
  int prev_end = -1;
  for (const auto& [a, b] : sup) {
    if (a < 0 || b >= ne || a > b || a <= prev_end)
      throw std::invalid_argument("interface space: invalid or overlapping supports");
    prev_end = b;
  }
}

}  // namespace detail

/// Pressure basis shaped by high-permeability channels: boundary ramps plus
/// one plateau hat per channel, sampled at edge midpoints.  The full set is
/// a partition of unity on the interface.
inline std::vector<std::vector<double>> build_physics_pressure_space(
    const Interface& f, const ChannelMap& map) {
  const int ne = f.num_edges();
  detail::check_supports(map.high, ne);
  const double a = 0.0, b = f.length();
  const int nh = static_cast<int>(map.high.size());

  if (nh == 0) {
    // Degenerate limit: two ramps spanning the linears.
    std::vector<std::vector<double>> vecs(2, std::vector<double>(ne));
    for (int e = 0; e < ne; ++e) {
      const double x = f.midpoint(e);
      vecs[0][e] = (b - x) / (b - a);
      vecs[1][e] = (x - a) / (b - a);
    }
    return vecs;
  }

  // Channel supports in arc length: [a_k, b_k].
  std::vector<double> ak(nh), bk(nh);
  for (int k = 0; k < nh; ++k) {
    ak[k] = map.high[k].first * f.edge_len;
    bk[k] = (map.high[k].second + 1) * f.edge_len;
  }

  std::vector<std::vector<double>> vecs;
  {
    std::vector<double> v(ne, 0.0);
    if (ak[0] > a) {
      for (int e = 0; e < ne; ++e) {
        const double x = f.midpoint(e);
        if (x < ak[0]) v[e] = (ak[0] - x) / (ak[0] - a);
      }
    }
    vecs.push_back(std::move(v));
  }
  for (int k = 0; k < nh; ++k) {
    const double left = (k == 0) ? a : bk[k - 1];
    const double right = (k + 1 == nh) ? b : ak[k + 1];
    std::vector<double> v(ne, 0.0);
    for (int e = 0; e < ne; ++e) {
      const double x = f.midpoint(e);
      if (x >= ak[k] && x <= bk[k])
        v[e] = 1.0;
      else if (x > left && x < ak[k])
        v[e] = (x - left) / (ak[k] - left);
      else if (x > bk[k] && x < right)
        v[e] = (right - x) / (right - bk[k]);
    }
    vecs.push_back(std::move(v));
  }
  {
    std::vector<double> v(ne, 0.0);
    if (bk[nh - 1] < b) {
      for (int e = 0; e < ne; ++e) {
        const double x = f.midpoint(e);
        if (x > bk[nh - 1]) v[e] = (x - bk[nh - 1]) / (b - bk[nh - 1]);
      }
    }
    vecs.push_back(std::move(v));
  }

  // Zero-width boundary ramps (channel touching the interface end) collapse
  // to the zero vector; drop them to keep the basis independent.
  std::vector<std::vector<double>> out;
  for (auto& v : vecs) {
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    if (nrm > 0.0) out.push_back(std::move(v));
  }
  return out;
}

/// Flux basis shaped by low-permeability barriers: indicators of the barrier
/// supports and of the gaps between them; disjoint and summing to one.
inline std::vector<std::vector<double>> build_physics_flux_space(
    const Interface& f, const ChannelMap& map) {
  const int ne = f.num_edges();
  detail::check_supports(map.low, ne);
  const int nl = static_cast<int>(map.low.size());
  if (nl == 0) return {std::vector<double>(ne, 1.0)};

  std::vector<std::vector<double>> vecs;
  auto indicator = [&](int e0, int e1) {
    std::vector<double> v(ne, 0.0);
    for (int e = e0; e <= e1; ++e) v[e] = 1.0;
    return v;
  };
  if (map.low[0].first > 0) vecs.push_back(indicator(0, map.low[0].first - 1));
  for (int k = 0; k < nl; ++k) {
    vecs.push_back(indicator(map.low[k].first, map.low[k].second));
    const int gap_start = map.low[k].second + 1;
    const int gap_end = (k + 1 < nl) ? map.low[k + 1].first - 1 : ne - 1;
    if (gap_start <= gap_end) vecs.push_back(indicator(gap_start, gap_end));
  }
  return vecs;
}

/// Per-edge Robin weighting alpha on every interface.
struct RobinParamField {
  std::vector<std::vector<double>> alpha;  // [interface][edge]

  static RobinParamField uniform(const SkeletonDecomposition& d, double value) {
    if (!(value > 0.0))
      throw std::invalid_argument("RobinParamField: alpha must be positive");
    RobinParamField p;
    p.alpha.resize(d.interfaces.size());
    for (std::size_t k = 0; k < d.interfaces.size(); ++k)
      p.alpha[k].assign(d.interfaces[k].num_edges(), value);
    return p;
  }
};

/// alpha_low on edges inside detected high-permeability supports,
/// alpha_high elsewhere.
inline RobinParamField adaptive_alpha(const SkeletonDecomposition& d,
                                      const std::vector<ChannelMap>& maps,
                                      double alpha_low, double alpha_high) {
  if (!(alpha_low > 0.0) || !(alpha_high > 0.0))
    throw std::invalid_argument("adaptive_alpha: alphas must be positive");
  RobinParamField p = RobinParamField::uniform(d, alpha_high);
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    for (const auto& [a, b] : maps[k].high)
      for (int e = a; e <= b; ++e) p.alpha[k][e] = alpha_low;
  }
  return p;
}

/// Physics-based spaces where structures are detected, linear polynomials
/// elsewhere; returns the per-interface channel maps alongside.
inline std::pair<MrcmSpaces, std::vector<ChannelMap>> build_physics_based_spaces(
    const SkeletonDecomposition& d, const PermField& abs_perm,
    double hi_factor = 10.0, double lo_factor = 10.0) {
  MrcmSpaces sp;
  sp.pressure.basis.resize(d.interfaces.size());
  sp.flux.basis.resize(d.interfaces.size());
  std::vector<ChannelMap> maps(d.interfaces.size());
  InterfaceSpace lin = build_polynomial_space(d, 1);
  for (std::size_t k = 0; k < d.interfaces.size(); ++k) {
    maps[k] = detect_structures(abs_perm, d.interfaces[k], hi_factor, lo_factor);
    sp.pressure.basis[k] = maps[k].high.empty()
                               ? lin.basis[k]
                               : build_physics_pressure_space(d.interfaces[k],
                                                             maps[k]);
    sp.flux.basis[k] = maps[k].low.empty()
                           ? lin.basis[k]
                           : build_physics_flux_space(d.interfaces[k], maps[k]);
  }
  return {std::move(sp), std::move(maps)};
}

}  // namespace mrcm
