#include "gridmrf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridmrf/fit.hpp"
#include "gridmrf/optim.hpp"
#include "gridmrf/rng.hpp"

namespace gridmrf {

MappingMatrix GenerativeSpec::mapping() const {
  if (!points.empty()) return build_point_mapping(grid, points);
  if (!areas.empty()) return build_areal_mapping(grid, areas);
  throw DomainError("generative spec has neither point nor areal observations");
}

Matrix GenerativeSpec::grid_covariance() const {
  auto locs = grid_centroids(grid);
  return gp.sigma2 * build_corr_matrix(locs, gp);
}

SseValue expected_sse_mrf(const MappingMatrix& K, const PrecisionMatrix& Q, double lambda,
                          const Matrix& C, double tau2, int hutchinson_threshold) {
  const int m = Q.m();
  if (C.rows() != m || C.cols() != m) {
    throw DomainError("covariance must be m x m over grid centroids");
  }
  SmoothingSolver solver(K, Q);
  solver.factorize(lambda);
  SseValue out;
  double t3 = C.trace();
  if (m <= hutchinson_threshold) {
    Matrix Kt = Matrix(K.mat.transpose());
    double t1 = solver.solve(Kt).squaredNorm();      // tr(S^T S)
    Matrix W = solver.solve(Matrix(solver.ktk()));   // S K = A^{-1} K^T K
    double t2 = (W.array() * C.array()).sum();       // tr(S K C), C symmetric
    double t4 = (W.array() * (W * C).array()).sum(); // tr((SK)^T (SK) C)
    out.value = tau2 * t1 - 2.0 * t2 + t3 + t4;
    return out;
  }
  // Hutchinson estimation of the three trace terms with common probes; the
  // per-probe combined estimates give the reported standard error.
  const int probes = 500;
  out.stochastic = true;
  auto rng = make_rng(derive_seed(0xACEu, static_cast<std::uint64_t>(m), probes));
  std::bernoulli_distribution coin(0.5);
  const SpMat& B = solver.ktk();
  double sum = 0.0, sumsq = 0.0;
  Vector z(m);
  for (int p = 0; p < probes; ++p) {
    for (int i = 0; i < m; ++i) z(i) = coin(rng) ? 1.0 : -1.0;
    Vector w1 = solver.solve(Vector(B * z));           // W z
    Vector cz = C * z;
    Vector w2 = solver.solve(Vector(B * cz));          // W C z
    // tr(S^T S) = tr(A^{-1} B A^{-1}) estimated with the same m-dim probe.
    Vector az = solver.solve(z);
    double t1m = az.dot(B * az);                        // z^T A^{-1} B A^{-1} z
    double t2m = z.dot(w2);                             // z^T W C z
    double t4m = w1.dot(w2);                            // z^T W^T W C z
    double s = tau2 * t1m - 2.0 * t2m + t4m;
    sum += s;
    sumsq += s * s;
  }
  double mean = sum / probes;
  double var = std::max(0.0, sumsq / probes - mean * mean) / (probes - 1);
  out.value = t3 + mean;
  out.se = std::sqrt(var);
  return out;
}

SseValue expected_sse_mrf(const GenerativeSpec& spec, const PrecisionMatrix& Q, double lambda,
                          int hutchinson_threshold) {
  return expected_sse_mrf(spec.mapping(), Q, lambda, spec.grid_covariance(), spec.tau2,
                          hutchinson_threshold);
}

namespace {

// Robust symmetric solve for the data covariance; escalating jitter mirrors
// cholesky_with_jitter.
Eigen::LDLT<Matrix> factor_data_cov(Matrix M, double scale) {
  double jitter = 0.0;
  for (int attempt = 0; attempt < 5; ++attempt) {
    if (jitter > 0.0) M.diagonal().array() += jitter;
    Eigen::LDLT<Matrix> ldlt(M);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) return ldlt;
    jitter = jitter == 0.0 ? 1e-10 * scale : 10.0 * jitter;
  }
  throw NumericError("data covariance not positive definite even with jitter");
}

}  // namespace

SseValue expected_sse_gp(const GenerativeSpec& spec) {
  MappingMatrix K = spec.mapping();
  Matrix C = spec.grid_covariance();
  Matrix Cgd = C * K.mat.transpose();               // m x n
  Matrix Cdd = K.mat * Cgd;                         // K C K^T, n x n
  Cdd.diagonal().array() += spec.tau2;
  auto ldlt = factor_data_cov(Cdd, spec.gp.sigma2 + spec.tau2);
  Matrix M = ldlt.solve(Cgd.transpose()).transpose();  // C_gd (C_dd + tau2 I)^{-1}
  SseValue out;
  out.value = C.trace() - 2.0 * (M.array() * Cgd.array()).sum() +
              ((M * Cdd).array() * M.array()).sum();
  return out;
}

OracleResult oracle_lambda(const GenerativeSpec& spec, const PrecisionMatrix& Q,
                           std::pair<double, double> log_lambda_bounds, double tol) {
  MappingMatrix K = spec.mapping();
  Matrix C = spec.grid_covariance();
  double last_se = 0.0;
  bool stochastic = false;
  auto objective = [&](double log_lambda) {
    SseValue v = expected_sse_mrf(K, Q, std::exp(log_lambda), C, spec.tau2);
    last_se = v.se;
    stochastic = stochastic || v.stochastic;
    return -v.value;  // golden section maximizes
  };
  GoldenResult res = golden_section_max(objective, log_lambda_bounds.first,
                                        log_lambda_bounds.second, tol);
  OracleResult out;
  out.lambda_star = std::exp(res.x);
  out.sse.value = -res.fx;
  out.sse.se = last_se;
  out.sse.stochastic = stochastic;
  out.at_bound = res.at_lower || res.at_upper;
  out.trace.reserve(res.trace.size());
  for (const auto& [x, fx] : res.trace) out.trace.emplace_back(x, -fx);
  return out;
}

McSse mc_sse_estimate(const GenerativeSpec& spec, OracleModel model, double lambda, int n_reps,
                      std::uint64_t seed) {
  if (n_reps < 2) throw DomainError("Monte Carlo needs at least 2 replicates");
  MappingMatrix K = spec.mapping();
  Matrix C = spec.grid_covariance();
  const int m = static_cast<int>(C.rows());
  const int n = K.n();
  Matrix L = cholesky_with_jitter(C, spec.gp.sigma2);

  std::optional<SmoothingSolver> solver;
  Matrix M;  // GP smoother
  if (model == OracleModel::Gp) {
    Matrix Cgd = C * K.mat.transpose();
    Matrix Cdd = K.mat * Cgd;
    Cdd.diagonal().array() += spec.tau2;
    auto ldlt = factor_data_cov(Cdd, spec.gp.sigma2 + spec.tau2);
    M = ldlt.solve(Cgd.transpose()).transpose();
  } else {
    PrecisionMatrix Q = model == OracleModel::Icar ? build_icar(spec.grid)
                                                   : build_tpsmrf(spec.grid);
    solver.emplace(K, Q);
    solver->factorize(lambda);
  }

  double noise_sd = std::sqrt(spec.tau2);
  double sum = 0.0, sumsq = 0.0;
  for (int rep = 0; rep < n_reps; ++rep) {
    auto rng = make_rng(derive_seed(seed, rep));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector zg(m);
    for (int i = 0; i < m; ++i) zg(i) = gauss(rng);
    Vector g = L.triangularView<Eigen::Lower>() * zg;
    Vector y = K.mat * g;
    for (int i = 0; i < n; ++i) y(i) += noise_sd * gauss(rng);
    Vector ghat = solver ? compute_ghat(*solver, y) : Vector(M * y);
    double sse = (ghat - g).squaredNorm();
    sum += sse;
    sumsq += sse * sse;
  }
  McSse out;
  out.n_reps = n_reps;
  out.mean = sum / n_reps;
  double var = std::max(0.0, sumsq / n_reps - out.mean * out.mean) / (n_reps - 1);
  out.se = std::sqrt(var);
  return out;
}

}  // namespace gridmrf
