#ifndef GRIDMRF_OPTIM_HPP
#define GRIDMRF_OPTIM_HPP

#include <functional>
#include <utility>
#include <vector>

#include "gridmrf/types.hpp"

namespace gridmrf {

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  bool at_lower = false;
  bool at_upper = false;
  // Every (x, f(x)) evaluation in order, endpoints included.
  std::vector<std::pair<double, double>> trace;
};

// Golden-section maximization of a unimodal f over [lo, hi] to |interval| < tol.
// Endpoints are evaluated too; if an endpoint beats the interior optimum the
// result sits on the bound and the corresponding flag is set.
GoldenResult golden_section_max(const std::function<double(double)>& f, double lo,
                                double hi, double tol);

struct NelderMeadResult {
  Vector x;
  double fx = 0.0;
  int evals = 0;
  bool converged = false;
};

// Derivative-free simplex minimization (reflection/expansion/contraction/
// shrink with standard coefficients).  Stops when the simplex f-spread falls
// below ftol or max_evals is reached.
NelderMeadResult nelder_mead_min(const std::function<double(const Vector&)>& f,
                                 const Vector& x0, double step, double ftol,
                                 int max_evals);

}  // namespace gridmrf

#endif
