#ifndef GRIDMRF_PRECISION_HPP
#define GRIDMRF_PRECISION_HPP

#include <string>

#include "gridmrf/grid.hpp"
#include "gridmrf/types.hpp"

namespace gridmrf {

enum class MrfFamily { Icar, Hicar, Dicar, TpsMrf };

const char* family_name(MrfFamily family);
MrfFamily family_from_name(const std::string& name);

// Intrinsic MRF precision matrix on a grid.  Symmetric, positive semidefinite,
// zero row sums; null_dim is the dimension of the unpenalized null space
// (1 for the CAR families, 3 for the thin-plate family: constants plus the
// two linear coordinate trends).
struct PrecisionMatrix {
  SpMat mat;  // m x m
  MrfFamily family = MrfFamily::Icar;
  int null_dim = 1;
  GridSpec grid;  // the grid the builder was given
  int m() const { return static_cast<int>(mat.rows()); }
};

// Neighborhood selection for the extended-neighborhood families.  max_dist is
// the centroid-distance cutoff in cell-width units (isotropic grids); for
// anisotropic grids raw Euclidean centroid distance is used instead.
struct NeighborhoodSpec {
  MrfFamily family = MrfFamily::Icar;
  double max_dist = 1.0;
};

// First-order intrinsic CAR: cardinal neighbors with weight 1, diagonal equal
// to the neighbor count (4 interior, 3 edge, 2 corner).
PrecisionMatrix build_icar(const GridSpec& grid);

// Higher-order ICAR: all cells within max_dist of a cell's centroid are
// neighbors with weight 1.  max_dist = 1 reproduces build_icar.
PrecisionMatrix build_hicar(const GridSpec& grid, double max_dist);

// Distance-weighted ICAR: neighbors within r carry weight d^(log 0.05/log r),
// which is 1 at d = 1 and decays to 0.05 at d = r.  Requires r > 1.
PrecisionMatrix build_dicar(const GridSpec& grid, double r);

// The DICAR weight law itself, exposed for direct inspection.
double dicar_weight(double d, double r);

// Thin-plate-spline penalty discretized by second differences: Q = D^T D
// where D stacks the second-difference operators in x, in y, and the cross
// differences (the latter entering the quadratic form with weight 2).
// Interior rows reproduce the stencil {20, -8, +2, +1}; boundary rows fall out
// of the operator construction.  Requires nx, ny >= 4.
PrecisionMatrix build_tpsmrf(const GridSpec& grid);

// Second-difference operator on a 1-D sequence: (n-2) x n rows [1, -2, 1].
// Building block of build_tpsmrf; D^T D is the second-order random walk
// penalty in one dimension.
SpMat second_difference_1d(int n);

// Null-space dimension c stored at construction (1, 1, 1, 3 per family).
int null_space_dim(const PrecisionMatrix& Q);

}  // namespace gridmrf

#endif
