#include "gridmrf/matern.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gridmrf/optim.hpp"
#include "gridmrf/rng.hpp"

namespace gridmrf {

void MaternParams::validate() const {
  if (!(nu > 0.0)) throw DomainError("matern nu must be > 0, got " + std::to_string(nu));
  if (!(rho > 0.0)) throw DomainError("matern rho must be > 0, got " + std::to_string(rho));
  if (!(sigma2 > 0.0)) {
    throw DomainError("matern sigma2 must be > 0, got " + std::to_string(sigma2));
  }
}

double matern_corr(double d, double nu, double rho) {
  if (!(nu > 0.0) || !(rho > 0.0)) throw DomainError("matern nu and rho must be > 0");
  if (!(d >= 0.0)) throw DomainError("matern distance must be >= 0");
  double u = 2.0 * std::sqrt(nu) * d / rho;
  if (u < 1e-150) return 1.0;  // limit value; also avoids K_nu overflow
  if (u > 700.0) return 0.0;   // K_nu underflows
  double norm = std::tgamma(nu) * std::pow(2.0, nu - 1.0);
  return std::pow(u, nu) * std::cyl_bessel_k(nu, u) / norm;
}

Matrix build_corr_matrix(std::span<const Point> locations, const MaternParams& params) {
  params.validate();
  const int n = static_cast<int>(locations.size());
  Matrix R(n, n);
  for (int i = 0; i < n; ++i) {
    R(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      double d = std::hypot(locations[i].x - locations[j].x, locations[i].y - locations[j].y);
      double v = matern_corr(d, params.nu, params.rho);
      R(i, j) = v;
      R(j, i) = v;
    }
  }
  return R;
}

Matrix build_cross_corr_matrix(std::span<const Point> rows, std::span<const Point> cols,
                               const MaternParams& params) {
  params.validate();
  Matrix R(rows.size(), cols.size());
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    for (int j = 0; j < static_cast<int>(cols.size()); ++j) {
      double d = std::hypot(rows[i].x - cols[j].x, rows[i].y - cols[j].y);
      R(i, j) = matern_corr(d, params.nu, params.rho);
    }
  }
  return R;
}

Matrix cholesky_with_jitter(const Matrix& cov, double scale) {
  double jitter = 0.0;
  for (int attempt = 0; attempt < 5; ++attempt) {
    Matrix work = cov;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(work);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-10 * scale : 10.0 * jitter;
  }
  throw NumericError("covariance not positive definite even with jitter " +
                     std::to_string(jitter / 10.0));
}

Vector sample_mvn(const Matrix& cov, std::uint64_t seed) {
  const int n = static_cast<int>(cov.rows());
  Matrix L = cholesky_with_jitter(cov, cov.diagonal().mean());
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector z(n);
  for (int i = 0; i < n; ++i) z(i) = gauss(rng);
  return L * z;
}

Vector simulate_gp_field(std::span<const Point> locations, const MaternParams& params,
                         std::uint64_t seed) {
  Matrix cov = params.sigma2 * build_corr_matrix(locations, params);
  return sample_mvn(cov, seed);
}

Vector gp_predict(std::span<const Point> data_locs, std::span<const Point> grid_locs,
                  const MaternParams& params, double tau2, const Vector& y) {
  params.validate();
  if (static_cast<int>(data_locs.size()) != y.size()) {
    throw DomainError("y length does not match data locations");
  }
  const int n = static_cast<int>(data_locs.size());
  Matrix M = params.sigma2 * build_corr_matrix(data_locs, params);
  M.diagonal().array() += tau2;
  Eigen::LDLT<Matrix> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw NumericError("kriging system factorization failed");
  Vector ones = Vector::Ones(n);
  Vector Mi_y = ldlt.solve(y);
  Vector Mi_1 = ldlt.solve(ones);
  double mu = ones.dot(Mi_y) / ones.dot(Mi_1);
  Vector Mi_r = ldlt.solve(y - mu * ones);
  Matrix Rgd = params.sigma2 * build_cross_corr_matrix(grid_locs, data_locs, params);
  return (mu + (Rgd * Mi_r).array()).matrix();
}

namespace {

struct GpObjective {
  std::span<const Point> locs;
  double nu;
  const Vector& y;
  double log_rho_lo;
  double log_rho_hi;
  double log_lam_lo = std::log(1e-6);
  double log_lam_hi = std::log(1e6);

  // Negative profile log-likelihood at (log lambda, log rho); sigma2 and the
  // constant mean are profiled out analytically.
  double operator()(const Vector& x) const {
    double penalty = 0.0;
    double ll = x(0), lr = x(1);
    if (ll < log_lam_lo) penalty += (log_lam_lo - ll) * (log_lam_lo - ll);
    if (ll > log_lam_hi) penalty += (ll - log_lam_hi) * (ll - log_lam_hi);
    if (lr < log_rho_lo) penalty += (log_rho_lo - lr) * (log_rho_lo - lr);
    if (lr > log_rho_hi) penalty += (lr - log_rho_hi) * (lr - log_rho_hi);
    if (penalty > 0.0) return 1e10 * (1.0 + penalty);
    const int n = static_cast<int>(locs.size());
    MaternParams p{nu, std::exp(lr), 1.0};
    Matrix M = build_corr_matrix(locs, p);
    M.diagonal().array() += std::exp(ll);
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) return 1e10;
    Vector ones = Vector::Ones(n);
    Vector Mi_y = llt.solve(y);
    Vector Mi_1 = llt.solve(ones);
    double mu = ones.dot(Mi_y) / ones.dot(Mi_1);
    Vector r = y - mu * ones;
    double quad = r.dot(llt.solve(r));
    if (!(quad > 0.0)) return 1e10;
    double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return 0.5 * (n * std::log(quad / n) + logdet + n);
  }
};

}  // namespace

GpFit gp_profile_fit(std::span<const Point> data_locs, std::span<const Point> grid_locs,
                     double nu, const Vector& y) {
  const int n = static_cast<int>(data_locs.size());
  if (n != y.size()) throw DomainError("y length does not match data locations");
  if (n < 3) throw DomainError("profile fit needs at least 3 observations");
  double xmin = data_locs[0].x, xmax = xmin, ymin = data_locs[0].y, ymax = ymin;
  for (const auto& p : data_locs) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  double diag = std::hypot(xmax - xmin, ymax - ymin);
  if (!(diag > 0.0)) throw DomainError("data locations are all coincident");

  GpObjective obj{data_locs, nu, y, std::log(diag / 100.0), std::log(4.0 * diag)};

  // Coarse grid start to dodge secondary modes, then simplex refinement.
  Vector best(2);
  double fbest = std::numeric_limits<double>::infinity();
  for (double ll : {-4.0, -2.0, 0.0, 2.0}) {
    for (double frac : {0.15, 0.4, 0.65, 0.9}) {
      Vector x(2);
      x << ll, obj.log_rho_lo + frac * (obj.log_rho_hi - obj.log_rho_lo);
      double f = obj(x);
      if (f < fbest) {
        fbest = f;
        best = x;
      }
    }
  }
  auto nm = nelder_mead_min([&obj](const Vector& x) { return obj(x); }, best, 0.5, 1e-8, 400);

  GpFit fit;
  fit.evals = nm.evals + 16;
  fit.converged = nm.converged;
  double lambda = std::exp(nm.x(0));
  double rho = std::exp(nm.x(1));
  MaternParams p{nu, rho, 1.0};
  Matrix M = build_corr_matrix(data_locs, p);
  M.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw NumericError("profile fit covariance factorization failed");
  Vector ones = Vector::Ones(n);
  Vector Mi_1 = llt.solve(ones);
  double mu = ones.dot(llt.solve(y)) / ones.dot(Mi_1);
  Vector r = y - mu * ones;
  Vector Mi_r = llt.solve(r);
  double sigma2 = r.dot(Mi_r) / n;

  fit.lambda = lambda;
  fit.rho = rho;
  fit.sigma2 = sigma2;
  fit.tau2 = lambda * sigma2;
  fit.mu = mu;

  Matrix Rgd = build_cross_corr_matrix(grid_locs, data_locs, p);
  fit.ghat = (mu + (Rgd * Mi_r).array()).matrix();
  const int g = static_cast<int>(grid_locs.size());
  fit.se.resize(g);
  double denom = ones.dot(Mi_1);
  for (int i = 0; i < g; ++i) {
    Vector rho_i = Rgd.row(i).transpose();
    Vector Mi_rho = llt.solve(rho_i);
    double var = 1.0 - rho_i.dot(Mi_rho);
    double adj = 1.0 - ones.dot(Mi_rho);
    var += adj * adj / denom;  // uncertainty from the estimated constant mean
    fit.se(i) = std::sqrt(std::max(0.0, sigma2 * var));
  }
  return fit;
}

}  // namespace gridmrf
