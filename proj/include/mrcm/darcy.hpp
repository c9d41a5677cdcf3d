#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mrcm/grid.hpp"
#include "mrcm/perm.hpp"

namespace mrcm {

enum class BcType { Dirichlet, Neumann, Robin };

/// One boundary-face condition.
///   Dirichlet: value = p_b
///   Neumann:   value = u.n (outward normal velocity)
///   Robin:     -beta*(u.n_out) + p_face = value, beta >= 0
struct BcEntry {
  BcType type = BcType::Neumann;
  double value = 0.0;
  double beta = 0.0;
};

enum class Side { Left, Right, Bottom, Top };

/// Per-fine-edge boundary conditions on the four sides of the grid.
struct BoundarySpec {
  std::vector<BcEntry> left, right;   // ny entries each
  std::vector<BcEntry> bottom, top;   // nx entries each

  static BoundarySpec no_flow(const CartesianGrid& g) {
    BoundarySpec bc;
    bc.left.assign(g.ny, {});
    bc.right.assign(g.ny, {});
    bc.bottom.assign(g.nx, {});
    bc.top.assign(g.nx, {});
    return bc;
  }

  std::vector<BcEntry>& side(Side s) {
    switch (s) {
      case Side::Left: return left;
      case Side::Right: return right;
      case Side::Bottom: return bottom;
      default: return top;
    }
  }

  void set_side(Side s, BcType type, double value, double beta = 0.0) {
    for (auto& e : side(s)) e = {type, value, beta};
  }

  bool same_structure(const BoundarySpec& o) const {
    auto eq = [](const std::vector<BcEntry>& a, const std::vector<BcEntry>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k].type != b[k].type || a[k].beta != b[k].beta) return false;
      return true;
    };
    return eq(left, o.left) && eq(right, o.right) && eq(bottom, o.bottom) &&
           eq(top, o.top);
  }
};

struct EllipticSolution {
  CellField p;
  FaceField u;
  double residual_norm = 0.0;
};

/// Harmonic face transmissibility for a face of the given length between two
/// cells with center distance `dist`.
inline double face_transmissibility(double k_left, double k_right,
                                    double face_len, double dist) {
  if (!(k_left > 0.0) || !(k_right > 0.0))
    throw std::invalid_argument("face_transmissibility: permeabilities must be > 0");
  const double sum = k_left + k_right;
  return face_len * 2.0 * k_left * k_right / (sum * dist);
}

/// Cell-centered TPFA operator for -div(kappa grad p) = q with mixed
/// boundary conditions.  The sparse factorization depends only on kappa and
/// the boundary structure (types and Robin beta), so many right-hand sides
/// (boundary values, sources) can be solved against one assembly.
class DarcyOperator {
 public:
  DarcyOperator(const CartesianGrid& grid, const CellField& kappa,
                const BoundarySpec& bc)
      : grid_(grid), kappa_(kappa), bc_structure_(bc) {
    validate_perm(kappa);
    if (kappa.size() != grid.num_cells())
      throw std::invalid_argument("DarcyOperator: kappa/grid mismatch");
    assemble();
  }

  bool gauged() const { return gauged_; }

  /// Solves with the boundary values in `bc` (which must share the assembly
  /// structure) and the cell source q (units: divergence, i.e. rate/volume).
  EllipticSolution solve(const BoundarySpec& bc, const CellField& q) const {
    if (!bc_structure_.same_structure(bc))
      throw std::invalid_argument("DarcyOperator::solve: boundary structure mismatch");
    const int n = grid_.num_cells();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + (gauged_ ? 1 : 0));
    for (int c = 0; c < n; ++c) rhs[c] = q[c] * grid_.cell_volume();
    accumulate_bc_rhs(bc, rhs);

    if (gauged_) {
      // Compatibility of the all-Neumann problem.
      double net = 0.0, scale = 1e-30;
      for (int c = 0; c < n; ++c) {
        net += rhs[c];
        scale = std::max(scale, std::abs(rhs[c]));
      }
      if (std::abs(net) > 1e-8 * std::max(scale, 1.0) * n)
        throw std::runtime_error(
            "DarcyOperator: incompatible all-Neumann data (sum q != boundary inflow)");
    }

    Eigen::VectorXd sol = lu_->solve(rhs);
    if (lu_->info() != Eigen::Success)
      throw std::runtime_error("DarcyOperator: sparse solve failed");
    const double rnorm = (mat_ * sol - rhs).norm();
    const double bnorm = rhs.norm();
    if (bnorm > 0.0 && rnorm > 1e-10 * bnorm)
      throw std::runtime_error("DarcyOperator: linear residual above tolerance");

    EllipticSolution out;
    out.residual_norm = bnorm > 0.0 ? rnorm / bnorm : rnorm;
    out.p = CellField(grid_);
    for (int c = 0; c < n; ++c) out.p[c] = sol[c];
    out.u = reconstruct_flux(out.p, bc);
    return out;
  }

  const CartesianGrid& grid() const { return grid_; }
  const Eigen::SparseMatrix<double>& matrix() const { return mat_; }

 private:
  // x-face transmissibility between (i-1,j) and (i,j).
  double tx(int i, int j) const {
    return face_transmissibility(kappa_(i - 1, j), kappa_(i, j), grid_.dy,
                                 grid_.dx);
  }
  double ty(int i, int j) const {
    return face_transmissibility(kappa_(i, j - 1), kappa_(i, j), grid_.dx,
                                 grid_.dy);
  }
  double tx_half(int i, int j) const {
    return grid_.dy * kappa_(i, j) / (0.5 * grid_.dx);
  }
  double ty_half(int i, int j) const {
    return grid_.dx * kappa_(i, j) / (0.5 * grid_.dy);
  }

  // Effective boundary transmissibility: flux_out = T_eff * (p_cell - r).
  static double bc_trans(const BcEntry& e, double t_half, double face_len) {
    if (e.type == BcType::Dirichlet) return t_half;
    if (e.type == BcType::Robin) return 1.0 / (e.beta / face_len + 1.0 / t_half);
    return 0.0;
  }

  void assemble() {
    const int n = grid_.num_cells();
    bool has_pressure = false;
    auto scan = [&](const std::vector<BcEntry>& v) {
      for (const auto& e : v)
        if (e.type != BcType::Neumann) has_pressure = true;
    };
    scan(bc_structure_.left);
    scan(bc_structure_.right);
    scan(bc_structure_.bottom);
    scan(bc_structure_.top);
    gauged_ = !has_pressure;

    const int dim = n + (gauged_ ? 1 : 0);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5 * n + 2 * n));
    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);

    for (int j = 0; j < grid_.ny; ++j) {
      for (int i = 0; i < grid_.nx; ++i) {
        const int c = grid_.cell(i, j);
        if (i > 0) {
          const double t = tx(i, j);
          diag[c] += t;
          trip.emplace_back(c, grid_.cell(i - 1, j), -t);
        } else {
          diag[c] += bc_trans(bc_structure_.left[j], tx_half(i, j), grid_.dy);
        }
        if (i + 1 < grid_.nx) {
          const double t = tx(i + 1, j);
          diag[c] += t;
          trip.emplace_back(c, grid_.cell(i + 1, j), -t);
        } else {
          diag[c] += bc_trans(bc_structure_.right[j], tx_half(i, j), grid_.dy);
        }
        if (j > 0) {
          const double t = ty(i, j);
          diag[c] += t;
          trip.emplace_back(c, grid_.cell(i, j - 1), -t);
        } else {
          diag[c] += bc_trans(bc_structure_.bottom[i], ty_half(i, j), grid_.dx);
        }
        if (j + 1 < grid_.ny) {
          const double t = ty(i, j + 1);
          diag[c] += t;
          trip.emplace_back(c, grid_.cell(i, j + 1), -t);
        } else {
          diag[c] += bc_trans(bc_structure_.top[i], ty_half(i, j), grid_.dx);
        }
      }
    }
    for (int c = 0; c < n; ++c) trip.emplace_back(c, c, diag[c]);

    if (gauged_) {
      // Mean-pressure gauge via a Lagrange multiplier.
      for (int c = 0; c < n; ++c) {
        trip.emplace_back(c, n, 1.0);
        trip.emplace_back(n, c, 1.0);
      }
    }

    mat_.resize(dim, dim);
    mat_.setFromTriplets(trip.begin(), trip.end());
    mat_.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->compute(mat_);
    if (lu_->info() != Eigen::Success)
      throw std::runtime_error("DarcyOperator: singular system");
  }

  void accumulate_bc_rhs(const BoundarySpec& bc, Eigen::VectorXd& rhs) const {
    for (int j = 0; j < grid_.ny; ++j) {
      {
        const BcEntry& e = bc.left[j];
        const int c = grid_.cell(0, j);
        if (e.type == BcType::Neumann)
          rhs[c] -= grid_.dy * e.value;
        else
          rhs[c] += bc_trans(e, tx_half(0, j), grid_.dy) * e.value;
      }
      {
        const BcEntry& e = bc.right[j];
        const int c = grid_.cell(grid_.nx - 1, j);
        if (e.type == BcType::Neumann)
          rhs[c] -= grid_.dy * e.value;
        else
          rhs[c] += bc_trans(e, tx_half(grid_.nx - 1, j), grid_.dy) * e.value;
      }
    }
    for (int i = 0; i < grid_.nx; ++i) {
      {
        const BcEntry& e = bc.bottom[i];
        const int c = grid_.cell(i, 0);
        if (e.type == BcType::Neumann)
          rhs[c] -= grid_.dx * e.value;
        else
          rhs[c] += bc_trans(e, ty_half(i, 0), grid_.dx) * e.value;
      }
      {
        const BcEntry& e = bc.top[i];
        const int c = grid_.cell(i, grid_.ny - 1);
        if (e.type == BcType::Neumann)
          rhs[c] -= grid_.dx * e.value;
        else
          rhs[c] += bc_trans(e, ty_half(i, grid_.ny - 1), grid_.dx) * e.value;
      }
    }
  }

  FaceField reconstruct_flux(const CellField& p, const BoundarySpec& bc) const {
    FaceField u(grid_);
    for (int j = 0; j < grid_.ny; ++j) {
      for (int i = 1; i < grid_.nx; ++i)
        u.x(i, j) = tx(i, j) * (p(i - 1, j) - p(i, j)) / grid_.dy;
      {
        const BcEntry& e = bc.left[j];
        if (e.type == BcType::Neumann)
          u.x(0, j) = -e.value;  // outward at left is -x
        else
          u.x(0, j) = -bc_trans(e, tx_half(0, j), grid_.dy) *
                      (p(0, j) - e.value) / grid_.dy;
      }
      {
        const BcEntry& e = bc.right[j];
        const int i = grid_.nx - 1;
        if (e.type == BcType::Neumann)
          u.x(grid_.nx, j) = e.value;
        else
          u.x(grid_.nx, j) = bc_trans(e, tx_half(i, j), grid_.dy) *
                             (p(i, j) - e.value) / grid_.dy;
      }
    }
    for (int i = 0; i < grid_.nx; ++i) {
      for (int j = 1; j < grid_.ny; ++j)
        u.y(i, j) = ty(i, j) * (p(i, j - 1) - p(i, j)) / grid_.dx;
      {
        const BcEntry& e = bc.bottom[i];
        if (e.type == BcType::Neumann)
          u.y(i, 0) = -e.value;
        else
          u.y(i, 0) = -bc_trans(e, ty_half(i, 0), grid_.dx) *
                      (p(i, 0) - e.value) / grid_.dx;
      }
      {
        const BcEntry& e = bc.top[i];
        const int j = grid_.ny - 1;
        if (e.type == BcType::Neumann)
          u.y(i, grid_.ny) = e.value;
        else
          u.y(i, grid_.ny) = bc_trans(e, ty_half(i, j), grid_.dx) *
                             (p(i, j) - e.value) / grid_.dx;
      }
    }
    return u;
  }

  CartesianGrid grid_;
  CellField kappa_;
  BoundarySpec bc_structure_;
  Eigen::SparseMatrix<double> mat_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
  bool gauged_ = false;
};

inline EllipticSolution solve_darcy(const CartesianGrid& grid,
                                    const CellField& kappa,
                                    const BoundarySpec& bc,
                                    const CellField& q) {
  return DarcyOperator(grid, kappa, bc).solve(bc, q);
}

}  // namespace mrcm
