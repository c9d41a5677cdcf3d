#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcm/grid.hpp"

namespace mrcm {

/// Scalar isotropic absolute permeability, cell-centered.
using PermField = CellField;

inline void validate_perm(const PermField& k) {
  for (int c = 0; c < k.size(); ++c)
    if (!(k[c] > 0.0))
      throw std::invalid_argument("permeability must be strictly positive, cell " +
                                  std::to_string(c));
}

inline PermField uniform_perm(const CartesianGrid& grid, double value = 1.0) {
  if (!(value > 0.0))
    throw std::invalid_argument("permeability must be strictly positive");
  return CellField(grid, value);
}

/// Axis-aligned rectangle (physical coordinates) scaling the permeability
/// of every cell whose center lies inside it.
struct ChannelRegion {
  double x_lo, x_hi, y_lo, y_hi;
  double factor;
};

struct ChannelSpec {
  std::vector<ChannelRegion> regions;
};

inline PermField apply_channels(const PermField& base, const ChannelSpec& spec) {
  for (const auto& r : spec.regions)
    if (!(r.factor > 0.0))
      throw std::invalid_argument("channel factor must be positive");
  PermField k = base;
  const CartesianGrid& g = k.grid;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double x = g.xc(i), y = g.yc(j);
      for (const auto& r : spec.regions) {
        if (x >= r.x_lo && x <= r.x_hi && y >= r.y_lo && y <= r.y_hi)
          k(i, j) *= r.factor;
      }
    }
  }
  return k;
}

/// Reads one layer of a whitespace-separated ASCII permeability file.
/// Values are x-fastest within a layer; layers are concatenated.
inline PermField load_perm_ascii(const std::string& path, int nx, int ny,
                                 int layer = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open permeability file: " + path);
  const long per_layer = static_cast<long>(nx) * ny;
  const long first = per_layer * layer;
  double v = 0.0;
  for (long k = 0; k < first; ++k) {
    if (!(in >> v))
      throw std::runtime_error("permeability file " + path +
                               ": parse error or EOF at value index " +
                               std::to_string(k));
  }
  CellField field(CartesianGrid(nx, ny, 1.0, 1.0));
  for (long k = 0; k < per_layer; ++k) {
    if (!(in >> v))
      throw std::runtime_error("permeability file " + path +
                               ": parse error or EOF at value index " +
                               std::to_string(first + k));
    if (!(v > 0.0))
      throw std::runtime_error("permeability file " + path +
                               ": non-positive entry at value index " +
                               std::to_string(first + k));
    field.values[static_cast<std::size_t>(k)] = v;
  }
  return field;
}

/// Same layer content re-hosted on an explicit grid geometry.
inline PermField load_perm_ascii(const std::string& path,
                                 const CartesianGrid& grid, int layer = 0) {
  PermField raw = load_perm_ascii(path, grid.nx, grid.ny, layer);
  raw.grid = grid;
  return raw;
}

}  // namespace mrcm
