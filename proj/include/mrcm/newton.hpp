#pragma once

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcm/fluid.hpp"
#include "mrcm/grid.hpp"

namespace mrcm {

enum class NewtonStrategy { Plain, UnderRelax, Inflection, Dogleg, Reflective };

inline std::string to_string(NewtonStrategy s) {
  switch (s) {
    case NewtonStrategy::Plain: return "plain";
    case NewtonStrategy::UnderRelax: return "under_relax";
    case NewtonStrategy::Inflection: return "inflection";
    case NewtonStrategy::Dogleg: return "dogleg";
    default: return "reflective";
  }
}

struct NewtonConfig {
  double eta = 1e-6;          // L2 step-norm convergence tolerance
  int max_iterations = 100;
  NewtonStrategy strategy = NewtonStrategy::Inflection;
  double relax_factor = 0.5;  // global under-relaxation factor
  bool enforce_bounds = true;
  /// Kink saturations for the gravity extension of the inflection rule;
  /// empty when the flux closures have no derivative discontinuities.
  std::vector<double> kinks;
  /// Applies an extra 0.5 under-relaxation before the inflection rule
  /// (gravity runs).
  bool gravity_guard = false;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> step_norms;
  bool converged = false;
  NewtonStrategy strategy = NewtonStrategy::Inflection;
  double residual_norm = 0.0;
};

using ResidualOp = std::function<CellField(const CellField&)>;
using JacobianOp = std::function<Eigen::SparseMatrix<double>(const CellField&)>;

/// Cellwise inflection-point rule: an update crossing a trust-region
/// boundary (the inflection of f, or a registered kink) is replaced by the
/// midpoint of the two iterates; the result is clamped to [0,1].
inline CellField step_inflection(const CellField& s_current,
                                 const CellField& s_proposed, double M,
                                 const std::vector<double>& kinks = {}) {
  CellField out = s_proposed;
  auto crosses = [&](double a, double b) {
    const double fa = fractional_flow(a, M).d2f;
    const double fb = fractional_flow(b, M).d2f;
    if (fa * fb < 0.0) return true;
    for (double k : kinks)
      if ((a - k) * (b - k) < 0.0) return true;
    return false;
  };
  for (int c = 0; c < out.size(); ++c) {
    // Bound the proposal first: an unclamped overshoot would put the
    // midpoint outside [0,1] and defeat the crossing control.
    double v = std::clamp(s_proposed[c], 0.0, 1.0);
    if (crosses(s_current[c], v)) v = 0.5 * (v + s_current[c]);
    out[c] = v;
  }
  return out;
}

namespace detail {

/// Direct solve of J d = -r with a single diagonal-shift retry.
inline bool solve_newton_system(const Eigen::SparseMatrix<double>& J,
                                const Eigen::VectorXd& r, Eigen::VectorXd& d) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(J);
  if (lu.info() == Eigen::Success) {
    d = lu.solve(-r);
    if (lu.info() == Eigen::Success && d.allFinite()) return true;
  }
  Eigen::SparseMatrix<double> shifted = J;
  for (int k = 0; k < shifted.rows(); ++k) shifted.coeffRef(k, k) += 1e-10;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success) return false;
  d = lu.solve(-r);
  return lu.info() == Eigen::Success && d.allFinite();
}

inline Eigen::VectorXd to_vec(const CellField& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.values.data(),
                                           static_cast<long>(f.values.size()));
}

inline CellField to_field(const CartesianGrid& g, const Eigen::VectorXd& v) {
  CellField f(g);
  for (int c = 0; c < f.size(); ++c) f[c] = v[c];
  return f;
}

}  // namespace detail

/// Dogleg step for the model m(d) = ||r + J d||^2 within radius Delta:
/// the Newton point if it fits, otherwise the Cauchy point truncated to the
/// boundary or the dogleg interpolation between the two.
inline Eigen::VectorXd step_dogleg(const Eigen::VectorXd& r,
                                   const Eigen::SparseMatrix<double>& J,
                                   double Delta) {
  const Eigen::VectorXd g = J.transpose() * r;  // half-gradient of ||r||^2
  Eigen::VectorXd d_newton;
  const bool have_newton = detail::solve_newton_system(J, r, d_newton);
  if (have_newton && d_newton.norm() <= Delta) return d_newton;

  const Eigen::VectorXd Jg = J * g;
  const double jg2 = Jg.squaredNorm();
  Eigen::VectorXd d_cauchy;
  if (jg2 > 0.0)
    d_cauchy = -(g.squaredNorm() / jg2) * g;
  else
    d_cauchy = Eigen::VectorXd::Zero(r.size());

  const double cn = d_cauchy.norm();
  if (cn >= Delta) return (Delta / cn) * d_cauchy;
  if (!have_newton) return d_cauchy;  // Cauchy-only fallback
  // Largest chi in [0,1] with ||d_cauchy + chi (d_newton - d_cauchy)|| <= Delta.
  const Eigen::VectorXd w = d_newton - d_cauchy;
  const double a = w.squaredNorm();
  const double b = 2.0 * d_cauchy.dot(w);
  const double cq = d_cauchy.squaredNorm() - Delta * Delta;
  double chi = 1.0;
  if (a > 0.0) {
    const double disc = std::max(0.0, b * b - 4.0 * a * cq);
    chi = std::clamp((-b + std::sqrt(disc)) / (2.0 * a), 0.0, 1.0);
  }
  return d_cauchy + chi * w;
}

/// Minimizer of 0.5 d^T B d + g^T d over span{v1,v2} within ||d|| <= Delta.
/// B is applied through J as B v = 2 J^T (J v) (Gauss-Newton Hessian of
/// ||r||^2).  The 2D disk subproblem is solved by interior test plus dense
/// boundary search.
inline Eigen::VectorXd step_reflective(const Eigen::VectorXd& r,
                                       const Eigen::SparseMatrix<double>& J,
                                       double Delta, double cg_tol = 1e-8) {
  const long n = r.size();
  const Eigen::VectorXd grad = 2.0 * (J.transpose() * r);
  if (grad.norm() == 0.0) return Eigen::VectorXd::Zero(n);

  auto apply_B = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return 2.0 * (J.transpose() * (J * v));
  };

  // Newton direction of the model by conjugate gradients on B d = -grad.
  Eigen::SparseMatrix<double> B = Eigen::SparseMatrix<double>(
      2.0 * (J.transpose() * J).pruned());
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                           Eigen::Lower | Eigen::Upper>
      cg;
  cg.setTolerance(cg_tol);
  cg.setMaxIterations(4 * n);
  cg.compute(B);
  Eigen::VectorXd d_newton = cg.solve(-grad);
  if (!d_newton.allFinite()) d_newton = -grad;

  // Orthonormal basis of span{grad, d_newton}.
  Eigen::VectorXd v1 = grad / grad.norm();
  Eigen::VectorXd v2 = d_newton - d_newton.dot(v1) * v1;
  const bool rank2 = v2.norm() > 1e-12 * d_newton.norm();
  if (rank2) v2 /= v2.norm();

  const int dim = rank2 ? 2 : 1;
  Eigen::MatrixXd V(n, dim);
  V.col(0) = v1;
  if (rank2) V.col(1) = v2;

  Eigen::MatrixXd Bt(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const Eigen::VectorXd Bv = apply_B(V.col(k));
    for (int l = 0; l < dim; ++l) Bt(l, k) = V.col(l).dot(Bv);
  }
  Eigen::VectorXd gt = V.transpose() * grad;

  auto model = [&](const Eigen::VectorXd& z) {
    return 0.5 * z.dot(Bt * z) + gt.dot(z);
  };

  Eigen::VectorXd best = Eigen::VectorXd::Zero(dim);
  double best_m = 0.0;
  // Interior stationary point.
  Eigen::LLT<Eigen::MatrixXd> llt(Bt);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd zi = llt.solve(-gt);
    if (zi.norm() <= Delta && model(zi) < best_m) {
      best = zi;
      best_m = model(zi);
    }
  }
  // Boundary search.
  if (dim == 1) {
    for (double sgn : {-1.0, 1.0}) {
      Eigen::VectorXd z(1);
      z[0] = sgn * Delta;
      if (model(z) < best_m) {
        best = z;
        best_m = model(z);
      }
    }
  } else {
    const int nth = 1440;
    double best_theta = 0.0;
    bool boundary_improves = false;
    for (int k = 0; k < nth; ++k) {
      const double th = 2.0 * M_PI * k / nth;
      Eigen::Vector2d z(Delta * std::cos(th), Delta * std::sin(th));
      const double m = model(z);
      if (m < best_m) {
        best_m = m;
        best_theta = th;
        boundary_improves = true;
      }
    }
    if (boundary_improves) {
      // Golden-section refinement around the best sample.
      double a = best_theta - 2.0 * M_PI / nth, b = best_theta + 2.0 * M_PI / nth;
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      auto mth = [&](double th) {
        Eigen::Vector2d z(Delta * std::cos(th), Delta * std::sin(th));
        return model(z);
      };
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      double f1 = mth(x1), f2 = mth(x2);
      for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - gr * (b - a);
          f1 = mth(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + gr * (b - a);
          f2 = mth(x2);
        }
      }
      const double th = 0.5 * (a + b);
      Eigen::Vector2d z(Delta * std::cos(th), Delta * std::sin(th));
      if (model(z) < best_m) {
        best_m = model(z);
        best.resize(2);
        best << z[0], z[1];
      } else {
        best.resize(2);
        best << Delta * std::cos(best_theta), Delta * std::sin(best_theta);
      }
    }
  }
  return V * best;
}

namespace detail {

/// Reflects bound-crossing components of s + d at the [0,1] faces, then
/// clamps whatever still escapes.
inline Eigen::VectorXd reflect_into_bounds(const Eigen::VectorXd& s,
                                           const Eigen::VectorXd& d) {
  Eigen::VectorXd out = s + d;
  for (long c = 0; c < out.size(); ++c) {
    if (out[c] > 1.0) out[c] = 2.0 - out[c];
    if (out[c] < 0.0) out[c] = -out[c];
    out[c] = std::clamp(out[c], 0.0, 1.0);
  }
  return out;
}

}  // namespace detail

/// Solves H(s) = 0 by the strategy in `config`.  Convergence is declared on
/// the L2 norm of the saturation change between successive iterates.
inline std::pair<CellField, SolveReport> newton_solve(
    const ResidualOp& residual_op, const JacobianOp& jacobian_op,
    const CellField& s_init, const NewtonConfig& config,
    double viscosity_ratio = 1.0) {
  CellField s = s_init;
  SolveReport rep;
  rep.strategy = config.strategy;

  const CartesianGrid& grid = s.grid;
  const long n = s.size();

  double Delta = 1.0;
  const double Delta_max = 16.0 * std::sqrt(static_cast<double>(n));

  CellField r_field = residual_op(s);
  Eigen::VectorXd r = detail::to_vec(r_field);
  if (r.norm() == 0.0) {
    rep.converged = true;
    rep.residual_norm = 0.0;
    return {s, rep};
  }

  auto clamp_field = [&](CellField& f) {
    if (!config.enforce_bounds) return;
    for (int c = 0; c < f.size(); ++c) f[c] = std::clamp(f[c], 0.0, 1.0);
  };

  while (rep.iterations < config.max_iterations) {
    Eigen::SparseMatrix<double> J = jacobian_op(s);
    CellField s_next = s;

    if (config.strategy == NewtonStrategy::Dogleg ||
        config.strategy == NewtonStrategy::Reflective) {
      const double phi0 = r.squaredNorm();
      bool accepted = false;
      for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
        Eigen::VectorXd d =
            config.strategy == NewtonStrategy::Dogleg
                ? step_dogleg(r, J, Delta)
                : step_reflective(r, J, Delta);
        Eigen::VectorXd sv = detail::to_vec(s);
        Eigen::VectorXd trial =
            config.strategy == NewtonStrategy::Reflective
                ? detail::reflect_into_bounds(sv, d)
                : (sv + d).eval();
        CellField trial_f = detail::to_field(grid, trial);
        clamp_field(trial_f);
        const Eigen::VectorXd d_eff = detail::to_vec(trial_f) - sv;

        const double pred =
            phi0 - (r + J * d_eff).squaredNorm();
        const double phi1 =
            detail::to_vec(residual_op(trial_f)).squaredNorm();
        const double ared = phi0 - phi1;
        const double rho = pred > 0.0 ? ared / pred : (ared > 0.0 ? 1.0 : -1.0);

        const bool hit_boundary = d.norm() >= 0.999 * Delta;
        if (rho > 0.0) {
          accepted = true;
          s_next = trial_f;
          if (rho < 0.25)
            Delta *= 0.25;
          else if (rho > 0.75 && hit_boundary)
            Delta = std::min(2.0 * Delta, Delta_max);
        } else {
          Delta *= 0.25;
          if (Delta < 1e-14) {
            // Radius collapsed; take the tiny step and let the step-norm
            // test decide.
            accepted = true;
            s_next = trial_f;
          }
        }
      }
    } else {
      Eigen::VectorXd d;
      if (!detail::solve_newton_system(J, r, d)) {
        rep.residual_norm = r.norm();
        return {s, rep};  // converged=false
      }
      if (config.strategy == NewtonStrategy::UnderRelax) d *= config.relax_factor;
      if (config.gravity_guard) d *= 0.5;
      Eigen::VectorXd prop = detail::to_vec(s) + d;
      CellField prop_f = detail::to_field(grid, prop);
      if (config.strategy == NewtonStrategy::Inflection) {
        s_next = step_inflection(s, prop_f, viscosity_ratio, config.kinks);
      } else {
        s_next = prop_f;
        clamp_field(s_next);
      }
    }

    const double step_norm =
        (detail::to_vec(s_next) - detail::to_vec(s)).norm();
    rep.step_norms.push_back(step_norm);
    ++rep.iterations;
    s = s_next;
    r_field = residual_op(s);
    r = detail::to_vec(r_field);

    if (step_norm <= config.eta) {
      rep.converged = true;
      break;
    }
  }
  rep.residual_norm = r.norm();
  return {s, rep};
}

/// Numeric sign-scan for derivative discontinuities of a scalar flux shape;
/// returns the kink saturations (empty for smooth closures).
inline std::vector<double> detect_flux_kinks(
    const std::function<double(double)>& flux, int samples = 20000,
    double jump_tol = 1e-3) {
  std::vector<double> kinks;
  const double h = 1.0 / samples;
  double prev_slope = (flux(h) - flux(0.0)) / h;
  double scale = std::abs(prev_slope);
  std::vector<double> slopes(samples);
  slopes[0] = prev_slope;
  for (int k = 1; k < samples; ++k) {
    slopes[k] = (flux((k + 1) * h) - flux(k * h)) / h;
    scale = std::max(scale, std::abs(slopes[k]));
  }
  for (int k = 1; k < samples; ++k) {
    // A genuine kink shows a one-sided derivative jump that does not shrink
    // with h; compare adjacent secant slopes against the curvature scale.
    const double jump = std::abs(slopes[k] - slopes[k - 1]);
    const double curvature_scale =
        (k > 1 ? std::abs(slopes[k - 1] - slopes[k - 2]) : 0.0) +
        (k + 1 < samples ? std::abs(slopes[k + 1] - slopes[k]) : 0.0);
    if (jump > jump_tol * std::max(scale, 1e-300) &&
        jump > 50.0 * curvature_scale)
      kinks.push_back(k * h);
  }
  return kinks;
}

}  // namespace mrcm
