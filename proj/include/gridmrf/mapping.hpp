#ifndef GRIDMRF_MAPPING_HPP
#define GRIDMRF_MAPPING_HPP

#include <span>
#include <variant>
#include <vector>

#include "gridmrf/grid.hpp"
#include "gridmrf/types.hpp"

namespace gridmrf {

struct PointObs {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
  double area() const { return (xmax - xmin) * (ymax - ymin); }
};

struct Polygon {
  std::vector<Point> vertices;  // closed implicitly (last connects to first)
};

struct ArealObs {
  std::variant<Rect, Polygon> region;
  double value = 0.0;
};

// Sparse n x m operator relating observations to grid cells.  Point rows hold
// a single 1; areal rows hold the overlap proportions of the region across the
// cells it intersects.  Every row sums to 1.
struct MappingMatrix {
  SpMat mat;  // n x m
  int n() const { return static_cast<int>(mat.rows()); }
  int m() const { return static_cast<int>(mat.cols()); }
};

// One row per observation, a single 1 in the cell containing the point.
// Out-of-bounds points raise DomainError with the row index attached.
MappingMatrix build_point_mapping(const GridSpec& grid, std::span<const PointObs> points);

// One row per region holding overlap proportions.  Rectangle overlaps are
// computed exactly; polygon overlaps by subsample x subsample midpoint
// sampling of each candidate cell.  Rows are renormalized to sum to exactly 1,
// absorbing subsampling error.  Degenerate or non-overlapping regions raise
// DomainError.
MappingMatrix build_areal_mapping(const GridSpec& grid, std::span<const ArealObs> areas,
                                  int subsample = 4);

// Stacks mapping blocks row-wise (e.g. point and areal data fitted jointly).
MappingMatrix stack_mappings(const MappingMatrix& top, const MappingMatrix& bottom);

// Even-odd rule; boundary behavior follows the crossing test.
bool point_in_polygon(const Polygon& poly, double x, double y);

}  // namespace gridmrf

#endif
