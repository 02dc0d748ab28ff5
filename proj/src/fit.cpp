#include "gridmrf/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gridmrf/optim.hpp"
#include "gridmrf/rng.hpp"

namespace gridmrf {

SmoothingSolver::SmoothingSolver(const MappingMatrix& K, const PrecisionMatrix& Q)
    : K_(K), Q_(Q) {
  if (K.m() != Q.m()) {
    throw DomainError("mapping has " + std::to_string(K.m()) + " cells but precision has " +
                      std::to_string(Q.m()));
  }
  if (K.n() < Q.null_dim) {
    throw DomainError("model unidentified: " + std::to_string(K.n()) +
                      " observations cannot pin down a null space of dimension " +
                      std::to_string(Q.null_dim));
  }
  ktk_ = SpMat(K.mat.transpose() * K.mat);
}

void SmoothingSolver::factorize(double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
  SpMat A = ktk_ + lambda * Q_.mat;
  if (!analyzed_) {
    ldlt_.analyzePattern(A);
    analyzed_ = true;
  }
  ldlt_.factorize(A);
  if (ldlt_.info() != Eigen::Success) {
    throw NumericError(
        "sparse factorization failed (disconnected grid or too few observations)");
  }
  if (ldlt_.vectorD().minCoeff() <= 0.0) {
    throw NumericError("smoothing system is singular at lambda=" + std::to_string(lambda));
  }
  lambda_ = lambda;
}

Vector SmoothingSolver::solve(const Vector& rhs) const {
  if (lambda_ <= 0.0) throw NumericError("solver not factorized");
  Vector x = ldlt_.solve(rhs);
  // One refinement step tightens the residual well past the 1e-8 contract.
  Vector r = rhs - (ktk_ * x + lambda_ * (Q_.mat * x));
  x += ldlt_.solve(r);
  return x;
}

Matrix SmoothingSolver::solve(const Matrix& rhs) const {
  if (lambda_ <= 0.0) throw NumericError("solver not factorized");
  Matrix x = ldlt_.solve(rhs);
  Matrix r = rhs - (ktk_ * x + lambda_ * (Q_.mat * x));
  x += ldlt_.solve(r);
  return x;
}

double SmoothingSolver::log_det() const {
  if (lambda_ <= 0.0) throw NumericError("solver not factorized");
  return ldlt_.vectorD().array().log().sum();
}

Vector SmoothingSolver::sample_inverse(std::uint64_t seed) const {
  if (lambda_ <= 0.0) throw NumericError("solver not factorized");
  const int m = this->m();
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector z(m);
  for (int i = 0; i < m; ++i) z(i) = gauss(rng);
  // A = P^T L D L^T P, so x = P^T L^{-T} D^{-1/2} z has covariance A^{-1}.
  Vector w = (ldlt_.vectorD().array().sqrt().inverse() * z.array()).matrix();
  Vector u = ldlt_.matrixU().solve(w);
  return ldlt_.permutationPinv() * u;
}

Vector compute_ghat(const SmoothingSolver& solver, const Vector& y) {
  if (y.size() != solver.n()) {
    throw DomainError("y has length " + std::to_string(y.size()) + ", expected " +
                      std::to_string(solver.n()));
  }
  Vector rhs = solver.mapping().mat.transpose() * y;
  Vector g = solver.solve(rhs);
  // Backward-error check: the residual is compared against the scale a stable
  // solve can reach, norm(A)*norm(g) + norm(rhs), not against norm(rhs) alone,
  // which near-singular systems at large lambda cannot satisfy.
  Vector ones = Vector::Ones(solver.m());
  double mat_norm = (solver.ktk().cwiseAbs() * ones +
                     solver.lambda() * (solver.precision().mat.cwiseAbs() * ones))
                        .maxCoeff();
  double scale = mat_norm * g.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
  if (scale > 0.0) {
    Vector resid = rhs - (solver.ktk() * g + solver.lambda() * (solver.precision().mat * g));
    if (resid.cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw NumericError("smoothing solve did not reach the residual tolerance");
    }
  }
  return g;
}

Vector compute_ghat(const MappingMatrix& K, const PrecisionMatrix& Q, double lambda,
                    const Vector& y) {
  SmoothingSolver solver(K, Q);
  solver.factorize(lambda);
  return compute_ghat(solver, y);
}

MarginalApply marginal_quadform_and_logdet(const SmoothingSolver& solver, const Matrix& V) {
  if (V.rows() != solver.n()) {
    throw DomainError("V has " + std::to_string(V.rows()) + " rows, expected " +
                      std::to_string(solver.n()));
  }
  const SpMat& K = solver.mapping().mat;
  MarginalApply out;
  out.siv = V - K * solver.solve(Matrix(K.transpose() * V));
  out.logdet = solver.log_det();
  return out;
}

MarginalApply marginal_quadform_and_logdet(const MappingMatrix& K, const PrecisionMatrix& Q,
                                           double lambda, const Matrix& V) {
  SmoothingSolver solver(K, Q);
  solver.factorize(lambda);
  return marginal_quadform_and_logdet(solver, V);
}

ProfileEstimates profile_beta_tau(const SmoothingSolver& solver, const Matrix& X,
                                  const Vector& y) {
  const int n = solver.n();
  const int c = solver.precision().null_dim;
  if (n <= c) throw DomainError("need more observations than the null-space dimension");
  ProfileEstimates est;
  Vector resid = y;
  if (X.cols() > 0) {
    if (X.rows() != n) throw DomainError("covariate matrix row count does not match y");
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw DomainError("covariate columns are linearly dependent");
    Matrix W = marginal_quadform_and_logdet(solver, X).siv;
    Matrix G = X.transpose() * W;
    Vector b = W.transpose() * y;
    // Covariate directions flat under the marginal precision (intercepts and,
    // for the thin-plate family, linear trends) are absorbed into g; the
    // minimum-norm GLS solution sets their coefficients to zero.  The marginal
    // precision is a contraction, so X.squaredNorm() bounds every eigenvalue
    // of G and anchors the cutoff even when all directions are flat.
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (G + G.transpose()));
    double emax = es.eigenvalues().cwiseAbs().maxCoeff();
    double thr = 1e-10 * std::max(emax, X.squaredNorm());
    est.beta = Vector::Zero(X.cols());
    if (thr > 0.0) {
      for (int i = 0; i < es.eigenvalues().size(); ++i) {
        double ev = es.eigenvalues()(i);
        if (ev > thr) {
          est.beta += es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(b) / ev);
        }
      }
    }
    resid = y - X * est.beta;
  }
  Vector siv = marginal_quadform_and_logdet(solver, Matrix(resid)).siv.col(0);
  est.tau2 = std::max(0.0, resid.dot(siv)) / (n - c);
  return est;
}

ProfileEstimates profile_beta_tau(const MappingMatrix& K, const PrecisionMatrix& Q,
                                  double lambda, const Matrix& X, const Vector& y) {
  SmoothingSolver solver(K, Q);
  solver.factorize(lambda);
  return profile_beta_tau(solver, X, y);
}

double profile_loglik(const SmoothingSolver& solver, const Matrix& X, const Vector& y) {
  const int m = solver.m();
  const int n = solver.n();
  const int c = solver.precision().null_dim;
  ProfileEstimates est = profile_beta_tau(solver, X, y);
  double ll = 0.5 * (m - c) * std::log(solver.lambda()) - 0.5 * (n - c) * std::log(est.tau2) -
              0.5 * solver.log_det();
  if (!std::isfinite(ll)) {
    throw NumericError("profile likelihood non-finite at lambda=" +
                       std::to_string(solver.lambda()));
  }
  return ll;
}

namespace {

PointwiseSe pointwise_se_impl(const SmoothingSolver& solver, double tau2, int exact_limit,
                              int probes) {
  const int m = solver.m();
  PointwiseSe out;
  Vector diag(m);
  if (m <= exact_limit) {
    const int block = 256;
    for (int start = 0; start < m; start += block) {
      int w = std::min(block, m - start);
      Matrix rhs = Matrix::Zero(m, w);
      for (int j = 0; j < w; ++j) rhs(start + j, j) = 1.0;
      Matrix cols = solver.solve(rhs);
      for (int j = 0; j < w; ++j) diag(start + j) = cols(start + j, j);
    }
  } else {
    // Stochastic diagonal estimate with Rademacher probes.  Cells are dealt
    // into probes by a lattice stride, so cells sharing a probe sit at least
    // s cells apart and the only error terms are their long-range couplings.
    // Random signs keep the estimate unbiased; a fixed seed keeps repeated
    // runs identical.
    out.stochastic = true;
    diag.setZero();
    const GridSpec& grid = solver.precision().grid;
    int s = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(probes))));
    std::vector<int> color(m);
    if (grid.nx > 0 && grid.ny > 0 && grid.nx * grid.ny == m) {
      for (int i = 0; i < m; ++i) {
        color[i] = (grid.row_of(i) % s) * s + (grid.col_of(i) % s);
      }
    } else {
      for (int i = 0; i < m; ++i) color[i] = i % (s * s);
    }
    auto rng = make_rng(derive_seed(0x7Au, static_cast<std::uint64_t>(m), probes));
    std::bernoulli_distribution coin(0.5);
    Vector sign(m);
    for (int i = 0; i < m; ++i) sign(i) = coin(rng) ? 1.0 : -1.0;
    Vector z(m);
    for (int p = 0; p < s * s; ++p) {
      z.setZero();
      bool used = false;
      for (int i = 0; i < m; ++i) {
        if (color[i] == p) {
          z(i) = sign(i);
          used = true;
        }
      }
      if (!used) continue;
      Vector sol = solver.solve(z);
      for (int i = 0; i < m; ++i) {
        if (color[i] == p) diag(i) = sign(i) * sol(i);
      }
    }
  }
  out.se = (tau2 * diag.cwiseMax(0.0)).cwiseSqrt();
  return out;
}

}  // namespace

PointwiseSe pointwise_se(const MappingMatrix& K, const PrecisionMatrix& Q,
                         const Hyperparams& hyper, int exact_limit) {
  SmoothingSolver solver(K, Q);
  solver.factorize(hyper.lambda);
  return pointwise_se_impl(solver, hyper.tau2, exact_limit, 200);
}

FitResult maximize_lambda(const MappingMatrix& K, const PrecisionMatrix& Q, const Matrix& X,
                          const Vector& y, std::pair<double, double> log_lambda_bounds,
                          double tol) {
  if (!(log_lambda_bounds.first < log_lambda_bounds.second)) {
    throw DomainError("lambda bounds must satisfy lo < hi");
  }
  SmoothingSolver solver(K, Q);
  auto objective = [&](double log_lambda) {
    solver.factorize(std::exp(log_lambda));
    return profile_loglik(solver, X, y);
  };
  GoldenResult opt = golden_section_max(objective, log_lambda_bounds.first,
                                        log_lambda_bounds.second, tol);

  // A flat likelihood tail leaves golden section at an arbitrary plateau
  // point.  When a bound is within numerical resolution of the optimum,
  // report the bound itself so callers see an unambiguous at-bound fit.
  if (!opt.at_lower && !opt.at_upper) {
    double f_lo = -std::numeric_limits<double>::infinity();
    double f_hi = -std::numeric_limits<double>::infinity();
    for (const auto& [x, f] : opt.trace) {
      if (x == log_lambda_bounds.first) f_lo = f;
      if (x == log_lambda_bounds.second) f_hi = f;
    }
    if (f_hi >= opt.fx - 1e-6) {
      opt.x = log_lambda_bounds.second;
      opt.fx = f_hi;
      opt.at_upper = true;
    } else if (f_lo >= opt.fx - 1e-6) {
      opt.x = log_lambda_bounds.first;
      opt.fx = f_lo;
      opt.at_lower = true;
    }
  }

  FitResult fit;
  fit.hyper.lambda = std::exp(opt.x);
  solver.factorize(fit.hyper.lambda);
  ProfileEstimates est = profile_beta_tau(solver, X, y);
  fit.hyper.tau2 = est.tau2;
  fit.beta = est.beta;
  Vector resid = X.cols() > 0 ? Vector(y - X * est.beta) : y;
  fit.ghat = compute_ghat(solver, resid);
  PointwiseSe se = pointwise_se_impl(solver, est.tau2, 2500, 200);
  fit.se_g = se.se;
  fit.se_stochastic = se.stochastic;
  fit.loglik_trace = opt.trace;
  fit.null_dim = Q.null_dim;
  fit.at_bound = opt.at_lower || opt.at_upper;
  return fit;
}

Vector posterior_draw_g(const MappingMatrix& K, const PrecisionMatrix& Q,
                        const Hyperparams& hyper, const Matrix& X, const Vector& beta,
                        const Vector& y, std::uint64_t seed) {
  if (!(hyper.tau2 >= 0.0)) throw DomainError("tau2 must be >= 0");
  SmoothingSolver solver(K, Q);
  solver.factorize(hyper.lambda);
  Vector resid = X.cols() > 0 ? Vector(y - X * beta) : y;
  Vector mean = compute_ghat(solver, resid);
  return mean + std::sqrt(hyper.tau2) * solver.sample_inverse(seed);
}

}  // namespace gridmrf
