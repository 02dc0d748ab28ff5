#ifndef GRIDMRF_ORACLE_HPP
#define GRIDMRF_ORACLE_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gridmrf/grid.hpp"
#include "gridmrf/mapping.hpp"
#include "gridmrf/matern.hpp"
#include "gridmrf/precision.hpp"
#include "gridmrf/types.hpp"

namespace gridmrf {

// Generative truth for oracle calculations: a Matern GP on the grid observed
// through K with Gaussian noise.  Works for point and areal observations.
struct GenerativeSpec {
  GridSpec grid;
  MaternParams gp;
  double tau2 = 1.0;
  std::vector<PointObs> points;  // values ignored; only locations matter
  std::vector<ArealObs> areas;   // used when points is empty

  MappingMatrix mapping() const;
  // C = Cov(g) over grid centroids under the GP (includes sigma2).
  Matrix grid_covariance() const;
};

struct SseValue {
  double value = 0.0;
  double se = 0.0;         // standard error when stochastic trace estimation was used
  bool stochastic = false;
};

// Expected sum of squared errors of the grid estimate at fixed lambda:
//   E SSE = tau2 tr(S^T S) - 2 tr(S K C) + tr(C) + tr(K^T S^T S K C)
// with S = (K^T K + lambda Q)^{-1} K^T and C the generative covariance of g
// at the grid centroids.  Exact traces for grids up to hutchinson_threshold
// cells, Hutchinson probing (500 probes) beyond.
SseValue expected_sse_mrf(const MappingMatrix& K, const PrecisionMatrix& Q, double lambda,
                          const Matrix& C, double tau2, int hutchinson_threshold = 2500);
SseValue expected_sse_mrf(const GenerativeSpec& spec, const PrecisionMatrix& Q, double lambda,
                          int hutchinson_threshold = 2500);

// Same quantity for the GP/kriging smoother at the true hyperparameters.
// Under the generative model g ~ N(0, C) on the grid and Y = Kg + noise, the
// predictor is M Y with M = C K^T (K C K^T + tau2 I)^{-1}, giving
//   E SSE = tr(C) - 2 tr(M K C) + tr(M (K C K^T + tau2 I) M^T).
SseValue expected_sse_gp(const GenerativeSpec& spec);

struct OracleResult {
  double lambda_star = 0.0;
  SseValue sse;
  bool at_bound = false;
  std::vector<std::pair<double, double>> trace;  // (lambda, expected SSE)
};

// Golden-section minimization of expected SSE over log lambda.
OracleResult oracle_lambda(const GenerativeSpec& spec, const PrecisionMatrix& Q,
                           std::pair<double, double> log_lambda_bounds, double tol = 1e-3);

enum class OracleModel { Icar, TpsMrf, Gp };

struct McSse {
  double mean = 0.0;
  double se = 0.0;
  int n_reps = 0;
};

// Monte Carlo check of the closed-form expected SSE: simulate fields + noise
// from the generative spec, smooth at fixed lambda (GP ignores lambda and
// uses the generative covariance), and average the realized SSE.
McSse mc_sse_estimate(const GenerativeSpec& spec, OracleModel model, double lambda, int n_reps,
                      std::uint64_t seed);

}  // namespace gridmrf

#endif
