#ifndef GRIDMRF_GRID_HPP
#define GRIDMRF_GRID_HPP

#include <vector>

#include "gridmrf/types.hpp"

namespace gridmrf {

// Fine regular grid carrying the latent surface.  Cells are indexed row-major:
// cell = row*nx + col, with cell (row, col) covering the half-open box
// [x0 + col*dx, x0 + (col+1)*dx) x [y0 + row*dy, y0 + (row+1)*dy).
struct GridSpec {
  int nx = 0;
  int ny = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = 1.0;

  int cells() const { return nx * ny; }
  int index(int row, int col) const { return row * nx + col; }
  int row_of(int cell) const { return cell / nx; }
  int col_of(int cell) const { return cell % nx; }
  double xmax() const { return x0 + nx * dx; }
  double ymax() const { return y0 + ny * dy; }
  Point centroid(int cell) const {
    return {x0 + (col_of(cell) + 0.5) * dx, y0 + (row_of(cell) + 0.5) * dy};
  }
  void validate() const;
};

// Unit-square grid with nx*ny cells, the default domain for simulations.
GridSpec unit_square_grid(int nx, int ny);

// Row-major cell containing (x, y).  Cell ownership is half-open in each axis;
// points on the global right/top boundary belong to the last cell so that the
// assignment is total over the closed bounding box.  Out-of-bounds coordinates
// raise DomainError naming the offending coordinate.
int cell_index(const GridSpec& grid, double x, double y);

// Centroids of all cells in index order.
std::vector<Point> grid_centroids(const GridSpec& grid);

}  // namespace gridmrf

#endif
