#include "gridmrf/grid.hpp"

#include <cmath>
#include <string>

namespace gridmrf {

void GridSpec::validate() const {
  if (nx < 1 || ny < 1) {
    throw DomainError("grid dimensions must be positive, got nx=" + std::to_string(nx) +
                      " ny=" + std::to_string(ny));
  }
  if (!(dx > 0.0) || !(dy > 0.0)) {
    throw DomainError("grid cell sizes must be positive, got dx=" + std::to_string(dx) +
                      " dy=" + std::to_string(dy));
  }
}

GridSpec unit_square_grid(int nx, int ny) {
  GridSpec g{nx, ny, 0.0, 0.0, 1.0 / nx, 1.0 / ny};
  g.validate();
  return g;
}

int cell_index(const GridSpec& grid, double x, double y) {
  if (!(x >= grid.x0) || !(x <= grid.xmax())) {
    throw DomainError("x=" + std::to_string(x) + " outside grid [" + std::to_string(grid.x0) +
                      ", " + std::to_string(grid.xmax()) + "]");
  }
  if (!(y >= grid.y0) || !(y <= grid.ymax())) {
    throw DomainError("y=" + std::to_string(y) + " outside grid [" + std::to_string(grid.y0) +
                      ", " + std::to_string(grid.ymax()) + "]");
  }
  int col = static_cast<int>(std::floor((x - grid.x0) / grid.dx));
  int row = static_cast<int>(std::floor((y - grid.y0) / grid.dy));
  // Right/top boundary points fold into the last cell.
  if (col >= grid.nx) col = grid.nx - 1;
  if (row >= grid.ny) row = grid.ny - 1;
  return grid.index(row, col);
}

std::vector<Point> grid_centroids(const GridSpec& grid) {
  std::vector<Point> out;
  out.reserve(grid.cells());
  for (int c = 0; c < grid.cells(); ++c) out.push_back(grid.centroid(c));
  return out;
}

}  // namespace gridmrf
