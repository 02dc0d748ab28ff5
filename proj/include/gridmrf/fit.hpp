#ifndef GRIDMRF_FIT_HPP
#define GRIDMRF_FIT_HPP

#include <Eigen/SparseCholesky>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "gridmrf/mapping.hpp"
#include "gridmrf/precision.hpp"
#include "gridmrf/types.hpp"

namespace gridmrf {

// Smoothing/noise parameterization: lambda = tau2 * kappa, so the process
// precision is kappa = lambda / tau2.
struct Hyperparams {
  double lambda = 1.0;
  double tau2 = 1.0;
  double kappa() const { return lambda / tau2; }
};

struct FitResult {
  Hyperparams hyper;
  Vector ghat;
  Vector se_g;
  std::vector<std::pair<double, double>> loglik_trace;  // (lambda, profile loglik)
  Vector beta;                                          // empty without covariates
  int null_dim = 1;
  bool at_bound = false;
  bool se_stochastic = false;
};

// Sparse symmetric factorization of A(lambda) = K^T K + lambda Q.  The
// fill-reducing ordering is analyzed once per sparsity pattern and reused
// across lambda evaluations; solves apply one step of iterative refinement.
class SmoothingSolver {
 public:
  SmoothingSolver(const MappingMatrix& K, const PrecisionMatrix& Q);

  void factorize(double lambda);
  double lambda() const { return lambda_; }

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  // log |K^T K + lambda Q| from the factorization.
  double log_det() const;
  // One draw from N(0, (K^T K + lambda Q)^{-1}).
  Vector sample_inverse(std::uint64_t seed) const;

  const SpMat& ktk() const { return ktk_; }
  const MappingMatrix& mapping() const { return K_; }
  const PrecisionMatrix& precision() const { return Q_; }
  int m() const { return static_cast<int>(ktk_.rows()); }
  int n() const { return K_.n(); }

 private:
  MappingMatrix K_;
  PrecisionMatrix Q_;
  SpMat ktk_;
  double lambda_ = -1.0;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  bool analyzed_ = false;
};

// Posterior mean of the latent field: solves (K^T K + lambda Q) g = K^T Y.
// Raises NumericError if the factorization fails (e.g. too few observations
// to pin down the null space) or the residual exceeds 1e-8 * |K^T Y|_inf.
Vector compute_ghat(const MappingMatrix& K, const PrecisionMatrix& Q, double lambda,
                    const Vector& y);
Vector compute_ghat(const SmoothingSolver& solver, const Vector& y);

struct MarginalApply {
  Matrix siv;     // (I - K (lambda Q + K^T K)^{-1} K^T) V; multiply by 1/tau2 for Sigma^{-1} V
  double logdet;  // log |lambda Q + K^T K|
};

// Sherman-Morrison-Woodbury application of the marginal precision of Y (the
// tau2 factor is left to the caller) plus the log-determinant from the same
// sparse factorization.
MarginalApply marginal_quadform_and_logdet(const MappingMatrix& K, const PrecisionMatrix& Q,
                                           double lambda, const Matrix& V);
MarginalApply marginal_quadform_and_logdet(const SmoothingSolver& solver, const Matrix& V);

struct ProfileEstimates {
  Vector beta;  // empty when X is empty
  double tau2 = 0.0;
};

// GLS beta and tau2 profiled at fixed lambda; tau2 uses divisor n - c with c
// the null-space dimension of Q.  Covariate directions already flat under the
// marginal precision (e.g. an intercept, which the intrinsic prior absorbs
// into g) receive the minimum-norm GLS solution.  Mutually dependent columns
// of X raise DomainError.
ProfileEstimates profile_beta_tau(const MappingMatrix& K, const PrecisionMatrix& Q,
                                  double lambda, const Matrix& X, const Vector& y);
ProfileEstimates profile_beta_tau(const SmoothingSolver& solver, const Matrix& X,
                                  const Vector& y);

// Profile log-likelihood of lambda (up to an additive constant):
//   (m - c)/2 log lambda - (n - c)/2 log tau2_hat - 1/2 log |lambda Q + K^T K|.
double profile_loglik(const SmoothingSolver& solver, const Matrix& X, const Vector& y);

// Golden-section maximization of the profile likelihood over log lambda,
// followed by ghat, tau2 and pointwise standard errors at the optimum.
// A maximum on the search bound sets at_bound instead of failing.
FitResult maximize_lambda(const MappingMatrix& K, const PrecisionMatrix& Q, const Matrix& X,
                          const Vector& y, std::pair<double, double> log_lambda_bounds,
                          double tol = 1e-3);

// One draw from the posterior of g:
//   N((K^T K + lambda Q)^{-1} K^T (Y - X beta), tau2 (K^T K + lambda Q)^{-1}).
Vector posterior_draw_g(const MappingMatrix& K, const PrecisionMatrix& Q,
                        const Hyperparams& hyper, const Matrix& X, const Vector& beta,
                        const Vector& y, std::uint64_t seed);

struct PointwiseSe {
  Vector se;
  bool stochastic = false;  // true when the Hutchinson estimator was used
};

// sqrt(tau2 * diag((K^T K + lambda Q)^{-1})): exact via per-column solves up
// to exact_limit cells, Hutchinson probing (200 probes) beyond it.
PointwiseSe pointwise_se(const MappingMatrix& K, const PrecisionMatrix& Q,
                         const Hyperparams& hyper, int exact_limit = 2500);

}  // namespace gridmrf

#endif
