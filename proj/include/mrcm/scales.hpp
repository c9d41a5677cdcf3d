#pragma once

#include <cmath>
#include <stdexcept>

namespace mrcm {

/// Reference quantities for the dimensionless form of the flow equations.
/// The pressure and gravity references are tied to the others:
///   p_ref = L * mu_w * u_ref / K_max,  g_ref = mu_w * u_ref / (rho_w * K_max).
struct DimensionlessScales {
  double L = 1.0;
  double u_ref = 1.0;
  double p_ref = 1.0;
  double g_ref = 1.0;
  double K_max = 1.0;
  double mu_w = 1.0;
  double rho_w = 1.0;

  void validate() const {
    for (double v : {L, u_ref, p_ref, g_ref, K_max, mu_w, rho_w})
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(
            "DimensionlessScales: entries must be positive and finite");
    const double p_expect = L * mu_w * u_ref / K_max;
    const double g_expect = mu_w * u_ref / (rho_w * K_max);
    if (std::abs(p_ref - p_expect) > 1e-12 * p_expect ||
        std::abs(g_ref - g_expect) > 1e-12 * g_expect)
      throw std::invalid_argument(
          "DimensionlessScales: reference identities violated");
  }
};

/// Builds consistent scales from the free parameters.
inline DimensionlessScales make_scales(double L, double u_ref, double K_max,
                                       double mu_w, double rho_w) {
  DimensionlessScales s;
  s.L = L;
  s.u_ref = u_ref;
  s.K_max = K_max;
  s.mu_w = mu_w;
  s.rho_w = rho_w;
  s.p_ref = L * mu_w * u_ref / K_max;
  s.g_ref = mu_w * u_ref / (rho_w * K_max);
  s.validate();
  return s;
}

}  // namespace mrcm
