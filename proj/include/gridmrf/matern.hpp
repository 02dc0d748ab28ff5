#ifndef GRIDMRF_MATERN_HPP
#define GRIDMRF_MATERN_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gridmrf/types.hpp"

namespace gridmrf {

// Matern correlation parameters: smoothness nu, range rho (domain units),
// marginal variance sigma2.
struct MaternParams {
  double nu = 0.5;
  double rho = 0.1;
  double sigma2 = 1.0;
  void validate() const;
};

// Matern correlation R(d) = (2 sqrt(nu) d / rho)^nu K_nu(...) / (Gamma(nu) 2^(nu-1)),
// with R(0) = 1 by continuity.  nu = 0.5 reduces to exp(-sqrt(2) d / rho).
double matern_corr(double d, double nu, double rho);

// Dense correlation matrix over a location set; unit diagonal, coincident
// points get correlation 1.
Matrix build_corr_matrix(std::span<const Point> locations, const MaternParams& params);

// Cross-correlation matrix R[i][j] = corr(rows[i], cols[j]).
Matrix build_cross_corr_matrix(std::span<const Point> rows, std::span<const Point> cols,
                               const MaternParams& params);

// Cholesky factor of a covariance matrix, adding diagonal jitter
// 1e-10 * scale on factorization failure and escalating x10 at most 3 times
// before raising NumericError.  Returns the lower factor.
Matrix cholesky_with_jitter(const Matrix& cov, double scale);

// One draw from N(0, cov) via cholesky_with_jitter; deterministic per seed.
Vector sample_mvn(const Matrix& cov, std::uint64_t seed);

// g ~ N(0, sigma2 * R) at the given locations.
Vector simulate_gp_field(std::span<const Point> locations, const MaternParams& params,
                         std::uint64_t seed);

// Kriging with known parameters: GLS estimate of a constant mean, then
// conditional expectation at grid_locs given Y at data_locs under
// cov = sigma2 R + tau2 I.
Vector gp_predict(std::span<const Point> data_locs, std::span<const Point> grid_locs,
                  const MaternParams& params, double tau2, const Vector& y);

struct GpFit {
  double lambda = 0.0;  // tau2 / sigma2
  double tau2 = 0.0;
  double rho = 0.0;
  double sigma2 = 0.0;
  double mu = 0.0;
  Vector ghat;  // predictions at grid_locs
  Vector se;    // kriging standard errors at grid_locs
  int evals = 0;
  bool converged = false;
};

// Maximum marginal likelihood over (log lambda, log rho) with sigma2 and the
// constant mean profiled out; nu is fixed by the caller.  The search is
// Nelder-Mead; log rho is restricted to [log(domain/100), log(4 domain)]
// where domain is the bounding-box diagonal of the data.
GpFit gp_profile_fit(std::span<const Point> data_locs, std::span<const Point> grid_locs,
                     double nu, const Vector& y);

}  // namespace gridmrf

#endif
