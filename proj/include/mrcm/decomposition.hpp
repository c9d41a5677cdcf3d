#pragma once

#include <stdexcept>
#include <vector>

#include "mrcm/grid.hpp"

namespace mrcm {

/// Axis of the fixed interface normal: X for vertical interfaces (normal
/// along +x), Y for horizontal interfaces (normal along +y).
enum class InterfaceAxis { X, Y };

/// One interface of the skeleton: the set of fine faces separating two
/// adjacent subdomains.  The fixed normal points outward from sub_lo, which
/// is always the subdomain with the smaller linear index, so n points
/// toward +x (vertical interfaces) or +y (horizontal interfaces).
struct Interface {
  int sub_lo = -1;
  int sub_hi = -1;
  InterfaceAxis axis = InterfaceAxis::X;
  /// Fine-face indices into FaceField::ux (axis==X) or FaceField::uy
  /// (axis==Y), ordered along the interface.
  std::vector<int> faces;
  /// Linear cell index adjacent to each face on the sub_lo / sub_hi side.
  std::vector<int> cells_lo;
  std::vector<int> cells_hi;
  /// Fine edge length (dy for vertical, dx for horizontal interfaces).
  double edge_len = 0.0;

  int num_edges() const { return static_cast<int>(faces.size()); }
  double length() const { return edge_len * num_edges(); }
  /// Arc-length coordinate of edge midpoint k, measured from the interface
  /// start (support [0, length()]).
  double midpoint(int k) const { return (k + 0.5) * edge_len; }
};

/// Cell-index box of one subdomain: i in [i0, i1), j in [j0, j1).
struct SubdomainBox {
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;
  int nx() const { return i1 - i0; }
  int ny() const { return j1 - j0; }
};

/// Non-overlapping uniform block decomposition of a Cartesian grid into
/// mx*my subdomains, with the interface skeleton enumerated.
struct SkeletonDecomposition {
  CartesianGrid grid;
  int mx = 1;
  int my = 1;
  std::vector<SubdomainBox> subdomains;      // linear id = sj*mx + si
  std::vector<Interface> interfaces;
  std::vector<std::vector<int>> sub_interfaces;  // interface ids per subdomain

  int num_subdomains() const { return mx * my; }
  int sub_id(int si, int sj) const { return sj * mx + si; }

  /// Subdomain side length transverse to the given interface axis; the
  /// characteristic coarse size H entering the Robin parameter.
  double coarse_size(InterfaceAxis axis) const {
    return axis == InterfaceAxis::X ? (grid.nx / mx) * grid.dx
                                    : (grid.ny / my) * grid.dy;
  }
};

inline SkeletonDecomposition build_decomposition(const CartesianGrid& grid,
                                                 int mx, int my) {
  if (mx < 1 || my < 1)
    throw std::invalid_argument("build_decomposition: counts must be >= 1");
  if (grid.nx % mx != 0 || grid.ny % my != 0)
    throw std::invalid_argument(
        "build_decomposition: subdomain counts must divide the cell counts");

  SkeletonDecomposition d;
  d.grid = grid;
  d.mx = mx;
  d.my = my;
  const int sw = grid.nx / mx;
  const int sh = grid.ny / my;

  d.subdomains.resize(static_cast<std::size_t>(mx * my));
  for (int sj = 0; sj < my; ++sj)
    for (int si = 0; si < mx; ++si)
      d.subdomains[d.sub_id(si, sj)] = {si * sw, (si + 1) * sw, sj * sh,
                                        (sj + 1) * sh};

  FaceField probe(grid);  // for face index arithmetic only
  // Vertical interfaces between (si,sj) and (si+1,sj).
  for (int sj = 0; sj < my; ++sj) {
    for (int si = 0; si + 1 < mx; ++si) {
      Interface f;
      f.sub_lo = d.sub_id(si, sj);
      f.sub_hi = d.sub_id(si + 1, sj);
      f.axis = InterfaceAxis::X;
      f.edge_len = grid.dy;
      const int i = (si + 1) * sw;
      for (int j = sj * sh; j < (sj + 1) * sh; ++j) {
        f.faces.push_back(probe.xf(i, j));
        f.cells_lo.push_back(grid.cell(i - 1, j));
        f.cells_hi.push_back(grid.cell(i, j));
      }
      d.interfaces.push_back(std::move(f));
    }
  }
  // Horizontal interfaces between (si,sj) and (si,sj+1).
  for (int sj = 0; sj + 1 < my; ++sj) {
    for (int si = 0; si < mx; ++si) {
      Interface f;
      f.sub_lo = d.sub_id(si, sj);
      f.sub_hi = d.sub_id(si, sj + 1);
      f.axis = InterfaceAxis::Y;
      f.edge_len = grid.dx;
      const int j = (sj + 1) * sh;
      for (int i = si * sw; i < (si + 1) * sw; ++i) {
        f.faces.push_back(probe.yf(i, j));
        f.cells_lo.push_back(grid.cell(i, j - 1));
        f.cells_hi.push_back(grid.cell(i, j));
      }
      d.interfaces.push_back(std::move(f));
    }
  }

  d.sub_interfaces.resize(static_cast<std::size_t>(mx * my));
  for (int k = 0; k < static_cast<int>(d.interfaces.size()); ++k) {
    d.sub_interfaces[d.interfaces[k].sub_lo].push_back(k);
    d.sub_interfaces[d.interfaces[k].sub_hi].push_back(k);
  }
  return d;
}

}  // namespace mrcm
