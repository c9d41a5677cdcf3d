#pragma once

#include <cmath>
#include <stdexcept>

namespace mrcm {

/// Phase viscosities and densities; quadratic relative permeabilities
/// k_rw = s^2, k_ro = (1-s)^2 are assumed throughout.
struct FluidProps {
  double mu_w = 1.0;
  double mu_o = 1.0;
  double rho_w = 1.0;
  double rho_o = 1.0;

  FluidProps() = default;
  FluidProps(double mu_w_, double mu_o_, double rho_w_ = 1.0,
             double rho_o_ = 1.0)
      : mu_w(mu_w_), mu_o(mu_o_), rho_w(rho_w_), rho_o(rho_o_) {
    if (!(mu_w > 0.0) || !(mu_o > 0.0) || !(rho_w > 0.0) || !(rho_o > 0.0))
      throw std::invalid_argument("FluidProps: all entries must be positive");
  }

  static FluidProps from_ratio(double M) { return FluidProps(1.0, M); }

  double viscosity_ratio() const { return mu_o / mu_w; }
};

struct FracFlow {
  double f;
  double df;
  double d2f;
};

inline void check_saturation(double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::domain_error("saturation outside [0,1]");
}

/// Fractional flow f(s) = M s^2 / (M s^2 + (1-s)^2) with closed-form first
/// and second derivatives.
inline FracFlow fractional_flow(double s, double M) {
  check_saturation(s);
  if (!(M > 0.0)) throw std::domain_error("viscosity ratio must be positive");
  const double om = 1.0 - s;
  const double den = M * s * s + om * om;
  const double dden = 2.0 * ((M + 1.0) * s - 1.0);
  FracFlow r;
  r.f = M * s * s / den;
  r.df = 2.0 * M * s * om / (den * den);
  r.d2f = (2.0 * M / (den * den * den)) *
          ((1.0 - 2.0 * s) * den - 2.0 * s * om * dden);
  return r;
}

struct Mobilities {
  double lam_w;
  double lam_o;
  double lam;    // total
  double lam_g;  // gravitational
  double dlam_w;
  double dlam_o;
};

inline Mobilities mobilities(double s, const FluidProps& props) {
  check_saturation(s);
  const double om = 1.0 - s;
  Mobilities m;
  m.lam_w = s * s / props.mu_w;
  m.lam_o = om * om / props.mu_o;
  m.lam = m.lam_w + m.lam_o;
  m.lam_g = m.lam_w * props.rho_w + m.lam_o * props.rho_o;
  m.dlam_w = 2.0 * s / props.mu_w;
  m.dlam_o = -2.0 * om / props.mu_o;
  return m;
}

inline double total_mobility(double s, const FluidProps& props) {
  return mobilities(s, props).lam;
}

/// Unique root of f'' in (0,1) for the quadratic-relperm fractional flow,
/// located by a sign scan followed by bisection.
inline double inflection_point(double M) {
  if (!(M > 0.0)) throw std::domain_error("viscosity ratio must be positive");
  auto d2f = [M](double s) { return fractional_flow(s, M).d2f; };
  const int n = 2000;
  double lo = 1.0 / n, hi = 1.0 - 1.0 / n;
  double a = lo, fa = d2f(a);
  double b = a;
  for (int k = 1; k <= n - 2; ++k) {
    b = lo + (hi - lo) * k / (n - 2.0);
    const double fb = d2f(b);
    if (fa * fb <= 0.0) break;
    a = b;
    fa = fb;
  }
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = d2f(m);
    if (fa * fm <= 0.0)
      b = m;
    else {
      a = m;
      fa = fm;
    }
    if (b - a < 1e-15) break;
  }
  return 0.5 * (a + b);
}

}  // namespace mrcm
