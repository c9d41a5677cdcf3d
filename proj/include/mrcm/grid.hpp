#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mrcm {

/// Uniform 2D Cartesian grid of nx*ny cells.  Cells are indexed (i,j) with
/// i the x index; linear ordering is row-major with x fastest:
/// cell(i,j) = j*nx + i.
struct CartesianGrid {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;

  CartesianGrid() = default;
  CartesianGrid(int nx_, int ny_, double dx_, double dy_, double x0_ = 0.0,
                double y0_ = 0.0)
      : nx(nx_), ny(ny_), dx(dx_), dy(dy_), x0(x0_), y0(y0_) {
    if (nx < 1 || ny < 1)
      throw std::invalid_argument("CartesianGrid: cell counts must be >= 1");
    if (!(dx > 0.0) || !(dy > 0.0))
      throw std::invalid_argument("CartesianGrid: cell sizes must be > 0");
  }

  int num_cells() const { return nx * ny; }
  double cell_volume() const { return dx * dy; }

  int cell(int i, int j) const { return j * nx + i; }
  double xc(int i) const { return x0 + (i + 0.5) * dx; }
  double yc(int j) const { return y0 + (j + 0.5) * dy; }

  bool same_shape(const CartesianGrid& o) const {
    return nx == o.nx && ny == o.ny && dx == o.dx && dy == o.dy &&
           x0 == o.x0 && y0 == o.y0;
  }
};

inline CartesianGrid build_grid(int nx, int ny, double dx, double dy,
                                std::pair<double, double> origin = {0.0, 0.0}) {
  return CartesianGrid(nx, ny, dx, dy, origin.first, origin.second);
}

/// One real value per cell, stored x-fastest.
struct CellField {
  CartesianGrid grid;
  std::vector<double> values;

  CellField() = default;
  explicit CellField(const CartesianGrid& g, double fill = 0.0)
      : grid(g), values(static_cast<std::size_t>(g.num_cells()), fill) {}

  double& operator()(int i, int j) { return values[grid.cell(i, j)]; }
  double operator()(int i, int j) const { return values[grid.cell(i, j)]; }
  double& operator[](int c) { return values[c]; }
  double operator[](int c) const { return values[c]; }

  int size() const { return static_cast<int>(values.size()); }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Face-normal velocity components on a staggered layout.
/// ux lives on vertical faces, (nx+1)*ny values, x-fastest;
/// uy lives on horizontal faces, nx*(ny+1) values, x-fastest.
/// Positive values mean flow toward +x / +y.
struct FaceField {
  CartesianGrid grid;
  std::vector<double> ux;
  std::vector<double> uy;

  FaceField() = default;
  explicit FaceField(const CartesianGrid& g, double fill = 0.0)
      : grid(g),
        ux(static_cast<std::size_t>((g.nx + 1) * g.ny), fill),
        uy(static_cast<std::size_t>(g.nx * (g.ny + 1)), fill) {}

  // x-face left of cell (i,j) is xf(i,j); right face is xf(i+1,j).
  int xf(int i, int j) const { return j * (grid.nx + 1) + i; }
  // y-face below cell (i,j) is yf(i,j); face above is yf(i,j+1).
  int yf(int i, int j) const { return j * grid.nx + i; }

  double& x(int i, int j) { return ux[xf(i, j)]; }
  double x(int i, int j) const { return ux[xf(i, j)]; }
  double& y(int i, int j) { return uy[yf(i, j)]; }
  double y(int i, int j) const { return uy[yf(i, j)]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : ux) m = std::max(m, std::abs(v));
    for (double v : uy) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Discrete divergence: per cell the net outward volumetric flux divided by
/// the cell volume.
inline CellField divergence(const FaceField& u) {
  const CartesianGrid& g = u.grid;
  CellField d(g);
  const double inv_v = 1.0 / g.cell_volume();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double fx = (u.x(i + 1, j) - u.x(i, j)) * g.dy;
      const double fy = (u.y(i, j + 1) - u.y(i, j)) * g.dx;
      d(i, j) = (fx + fy) * inv_v;
    }
  }
  return d;
}

}  // namespace mrcm
