#include "gridmrf/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace gridmrf {

MappingMatrix build_point_mapping(const GridSpec& grid, std::span<const PointObs> points) {
  grid.validate();
  std::vector<Triplet> trips;
  trips.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    int cell;
    try {
      cell = cell_index(grid, points[i].x, points[i].y);
    } catch (const DomainError& e) {
      throw DomainError("observation " + std::to_string(i) + ": " + e.what());
    }
    trips.emplace_back(static_cast<int>(i), cell, 1.0);
  }
  MappingMatrix K;
  K.mat.resize(static_cast<int>(points.size()), grid.cells());
  K.mat.setFromTriplets(trips.begin(), trips.end());
  return K;
}

bool point_in_polygon(const Polygon& poly, double x, double y) {
  bool inside = false;
  const auto& v = poly.vertices;
  std::size_t n = v.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((v[i].y > y) != (v[j].y > y)) {
      double xcross = v[j].x + (y - v[j].y) / (v[i].y - v[j].y) * (v[i].x - v[j].x);
      if (x < xcross) inside = !inside;
    }
  }
  return inside;
}

namespace {

// Cells overlapping [lo, hi) along one axis, clamped to the grid.
std::pair<int, int> cell_range(double lo, double hi, double origin, double step, int count) {
  int a = static_cast<int>(std::floor((lo - origin) / step));
  int b = static_cast<int>(std::ceil((hi - origin) / step));
  return {std::max(0, a), std::min(count, b)};
}

void add_rect_row(std::vector<Triplet>& trips, int row, const GridSpec& grid, const Rect& r) {
  if (!(r.xmax > r.xmin) || !(r.ymax > r.ymin)) {
    throw DomainError("region " + std::to_string(row) + ": degenerate rectangle");
  }
  auto [c0, c1] = cell_range(r.xmin, r.xmax, grid.x0, grid.dx, grid.nx);
  auto [r0, r1] = cell_range(r.ymin, r.ymax, grid.y0, grid.dy, grid.ny);
  double total = 0.0;
  std::vector<Triplet> local;
  for (int rr = r0; rr < r1; ++rr) {
    double ylo = grid.y0 + rr * grid.dy;
    double ov_y = std::min(r.ymax, ylo + grid.dy) - std::max(r.ymin, ylo);
    if (ov_y <= 0.0) continue;
    for (int cc = c0; cc < c1; ++cc) {
      double xlo = grid.x0 + cc * grid.dx;
      double ov_x = std::min(r.xmax, xlo + grid.dx) - std::max(r.xmin, xlo);
      if (ov_x <= 0.0) continue;
      double w = ov_x * ov_y;
      local.emplace_back(row, grid.index(rr, cc), w);
      total += w;
    }
  }
  if (total <= 0.0) {
    throw DomainError("region " + std::to_string(row) + " does not overlap the grid");
  }
  for (auto& t : local) trips.emplace_back(t.row(), t.col(), t.value() / total);
}

void add_polygon_row(std::vector<Triplet>& trips, int row, const GridSpec& grid,
                     const Polygon& poly, int subsample) {
  if (poly.vertices.size() < 3) {
    throw DomainError("region " + std::to_string(row) + ": polygon needs at least 3 vertices");
  }
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& p : poly.vertices) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  auto [c0, c1] = cell_range(xmin, xmax, grid.x0, grid.dx, grid.nx);
  auto [r0, r1] = cell_range(ymin, ymax, grid.y0, grid.dy, grid.ny);
  double total = 0.0;
  std::vector<Triplet> local;
  const int s = subsample;
  for (int rr = r0; rr < r1; ++rr) {
    for (int cc = c0; cc < c1; ++cc) {
      int hits = 0;
      for (int iy = 0; iy < s; ++iy) {
        double y = grid.y0 + rr * grid.dy + (iy + 0.5) * grid.dy / s;
        for (int ix = 0; ix < s; ++ix) {
          double x = grid.x0 + cc * grid.dx + (ix + 0.5) * grid.dx / s;
          if (point_in_polygon(poly, x, y)) ++hits;
        }
      }
      if (hits == 0) continue;
      double w = static_cast<double>(hits) / (s * s);
      local.emplace_back(row, grid.index(rr, cc), w);
      total += w;
    }
  }
  if (total <= 0.0) {
    throw DomainError("region " + std::to_string(row) + " does not overlap the grid");
  }
  for (auto& t : local) trips.emplace_back(t.row(), t.col(), t.value() / total);
}

}  // namespace

MappingMatrix build_areal_mapping(const GridSpec& grid, std::span<const ArealObs> areas,
                                  int subsample) {
  grid.validate();
  if (subsample < 1) throw DomainError("subsample must be >= 1");
  std::vector<Triplet> trips;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    int row = static_cast<int>(i);
    std::visit(
        [&](const auto& region) {
          using T = std::decay_t<decltype(region)>;
          if constexpr (std::is_same_v<T, Rect>) {
            add_rect_row(trips, row, grid, region);
          } else {
            add_polygon_row(trips, row, grid, region, subsample);
          }
        },
        areas[i].region);
  }
  MappingMatrix K;
  K.mat.resize(static_cast<int>(areas.size()), grid.cells());
  K.mat.setFromTriplets(trips.begin(), trips.end());
  return K;
}

MappingMatrix stack_mappings(const MappingMatrix& top, const MappingMatrix& bottom) {
  if (top.m() != bottom.m()) {
    throw DomainError("cannot stack mappings over different grids (" + std::to_string(top.m()) +
                      " vs " + std::to_string(bottom.m()) + " cells)");
  }
  std::vector<Triplet> trips;
  trips.reserve(top.mat.nonZeros() + bottom.mat.nonZeros());
  for (int k = 0; k < top.mat.outerSize(); ++k) {
    for (SpMat::InnerIterator it(top.mat, k); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int k = 0; k < bottom.mat.outerSize(); ++k) {
    for (SpMat::InnerIterator it(bottom.mat, k); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()) + top.n(), static_cast<int>(it.col()),
                         it.value());
    }
  }
  MappingMatrix K;
  K.mat.resize(top.n() + bottom.n(), top.m());
  K.mat.setFromTriplets(trips.begin(), trips.end());
  return K;
}

}  // namespace gridmrf
