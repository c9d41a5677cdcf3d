#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mrcm/grid.hpp"

namespace mrcm {

/// Plain-text cell-field format:
///   header line: nx ny dx dy x0 y0
///   then ny lines of nx values, row j ascending.
/// Values carry 17 significant digits so a write/read round trip is exact.
inline void write_field(const CellField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_field: cannot open " + path);
  const CartesianGrid& g = f.grid;
  out << std::setprecision(17);
  out << g.nx << ' ' << g.ny << ' ' << g.dx << ' ' << g.dy << ' ' << g.x0
      << ' ' << g.y0 << '\n';
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i) out << ' ';
      out << f(i, j);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_field: write failed for " + path);
}

inline CellField read_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_field: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_field: " + path + ": empty file (line 1)");
  std::istringstream hdr(line);
  int nx = 0, ny = 0;
  double dx = 0, dy = 0, x0 = 0, y0 = 0;
  if (!(hdr >> nx >> ny >> dx >> dy >> x0 >> y0))
    throw std::runtime_error("read_field: " + path +
                             ": malformed header (line 1)");
  CartesianGrid g;
  try {
    g = CartesianGrid(nx, ny, dx, dy, x0, y0);
  } catch (const std::exception& e) {
    throw std::runtime_error("read_field: " + path + ": bad header (line 1): " +
                             e.what());
  }
  CellField f(g);
  for (int j = 0; j < ny; ++j) {
    if (!std::getline(in, line))
      throw std::runtime_error("read_field: " + path +
                               ": missing data row (line " +
                               std::to_string(j + 2) + ")");
    std::istringstream row(line);
    for (int i = 0; i < nx; ++i) {
      if (!(row >> f(i, j)))
        throw std::runtime_error("read_field: " + path +
                                 ": short or malformed row (line " +
                                 std::to_string(j + 2) + ")");
    }
    double extra;
    if (row >> extra)
      throw std::runtime_error("read_field: " + path +
                               ": row longer than header says (line " +
                               std::to_string(j + 2) + ")");
  }
  return f;
}

}  // namespace mrcm
