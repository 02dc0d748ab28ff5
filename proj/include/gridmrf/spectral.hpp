#ifndef GRIDMRF_SPECTRAL_HPP
#define GRIDMRF_SPECTRAL_HPP

#include <string>
#include <vector>

#include "gridmrf/grid.hpp"
#include "gridmrf/matern.hpp"
#include "gridmrf/precision.hpp"
#include "gridmrf/types.hpp"

namespace gridmrf {

// Implied prior spectrum: inverse nonzero eigenvalues of the precision,
// sorted descending and scaled so the entry at normalize_index (1-based) is 1.
struct EigenCurve {
  std::vector<double> values;
  int normalize_index = 1;
  std::string label;
};

// Dense eigendecomposition of Q; eigenvalues below 1e-8 * max are treated as
// the null space and dropped.  Grids above 6400 cells raise SizeError.
EigenCurve eigencurve_mrf(const GridSpec& grid, const PrecisionMatrix& Q, int normalize_index,
                          const std::string& label);

// Same scaling applied to the eigenvalues of a Matern correlation matrix over
// the grid centroids (eigenvalues used directly, largest first).
EigenCurve eigencurve_gp(const GridSpec& grid, const MaternParams& params, int normalize_index,
                         const std::string& label);

// One row of the equivalent smoothing kernel at a focal cell.
struct KernelSlice {
  int focal = 0;        // focal cell index
  Vector weights;       // full kernel row over the grid
  double lambda = 1.0;
  std::vector<double> cross_x;       // x offsets of the horizontal transect
  std::vector<double> cross_weights; // kernel values along the focal row
};

// Row of S = (lambda Q + I)^{-1} at the focal cell (observations at every
// cell).  Rows sum to 1 up to solver accuracy.
KernelSlice equivalent_kernel_mrf(const GridSpec& grid, const PrecisionMatrix& Q, double lambda,
                                  int focal_cell);

// GP analogue R (R + lambda I)^{-1} with R the Matern correlation over
// centroids; same size guard as the eigencurves.
KernelSlice equivalent_kernel_gp(const GridSpec& grid, const MaternParams& params, double lambda,
                                 int focal_cell);

}  // namespace gridmrf

#endif
