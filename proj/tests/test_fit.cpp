#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "dense_reference.hpp"
#include "gridmrf/fit.hpp"
#include "gridmrf/grid.hpp"
#include "gridmrf/mapping.hpp"
#include "gridmrf/precision.hpp"

using namespace gridmrf;

namespace {

struct Problem {
  GridSpec grid;
  MappingMatrix k;
  Vector y;
};

// Deterministic scattered observations of a smooth surface plus noise.
Problem make_problem(int nx, int ny, int n_obs, double noise_sd, std::uint64_t seed) {
  Problem p;
  p.grid = unit_square_grid(nx, ny);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<PointObs> pts;
  p.y.resize(n_obs);
  for (int i = 0; i < n_obs; ++i) {
    double x = unif(rng), y = unif(rng);
    double f = std::sin(3.0 * x) + 0.5 * std::cos(2.0 * y) + 0.3 * x * y;
    pts.push_back({x, y, f});
    p.y(i) = f + noise_sd * gauss(rng);
  }
  p.k = build_point_mapping(p.grid, pts);
  return p;
}

MappingMatrix identity_mapping(const GridSpec& grid) {
  std::vector<PointObs> pts;
  for (int i = 0; i < grid.cells(); ++i) {
    Point c = grid.centroid(i);
    pts.push_back({c.x, c.y, 0.0});
  }
  return build_point_mapping(grid, pts);
}

}  // namespace

TEST_CASE("solver rejects mismatched shapes and unidentified models") {
  Problem p = make_problem(6, 6, 10, 0.1, 1);
  PrecisionMatrix q_small = build_icar(unit_square_grid(5, 5));
  CHECK_THROWS_AS(SmoothingSolver(p.k, q_small), DomainError);

  GridSpec g = unit_square_grid(6, 6);
  std::vector<PointObs> two = {{0.1, 0.1, 0.0}, {0.9, 0.9, 0.0}};
  MappingMatrix k2 = build_point_mapping(g, two);
  CHECK_THROWS_AS(SmoothingSolver(k2, build_tpsmrf(g)), DomainError);
  CHECK_NOTHROW(SmoothingSolver(k2, build_icar(g)));
}

TEST_CASE("solver refuses nonpositive lambda and use before factorization") {
  Problem p = make_problem(6, 6, 10, 0.1, 2);
  SmoothingSolver solver(p.k, build_icar(p.grid));
  CHECK_THROWS_AS(solver.factorize(0.0), DomainError);
  CHECK_THROWS_AS(solver.factorize(-1.0), DomainError);
  Vector zero = Vector::Zero(36);
  CHECK_THROWS_AS(solver.solve(zero), NumericError);
  CHECK_THROWS_AS(solver.log_det(), NumericError);
}

TEST_CASE("full observation at negligible smoothing recovers the data") {
  GridSpec g = unit_square_grid(5, 5);
  MappingMatrix k = identity_mapping(g);
  PrecisionMatrix q = build_icar(g);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector y(25);
  for (int i = 0; i < 25; ++i) y(i) = gauss(rng);
  Vector ghat = compute_ghat(k, q, 1e-10, y);
  CHECK((ghat - y).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("constant data is reproduced exactly by every family") {
  GridSpec g = unit_square_grid(8, 8);
  Problem p = make_problem(8, 8, 20, 0.0, 4);
  Vector y = Vector::Constant(20, 2.5);
  for (const auto& q :
       {build_icar(g), build_hicar(g, 3.0), build_dicar(g, 5.0), build_tpsmrf(g)}) {
    Vector ghat = compute_ghat(p.k, q, std::exp(2.0), y);
    CHECK((ghat.array() - 2.5).abs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("thin-plate smoothing reproduces planar data exactly at any strength") {
  GridSpec g = unit_square_grid(8, 8);
  // Observations at centroids of scattered cells, values on an exact plane;
  // the plane lies in the penalty null space, so the fit is exact for all
  // lambda.
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 63);
  std::vector<PointObs> pts;
  std::vector<bool> used(64, false);
  Vector y;
  std::vector<double> vals;
  while (pts.size() < 25) {
    int cell = pick(rng);
    if (used[cell]) continue;
    used[cell] = true;
    Point c = g.centroid(cell);
    pts.push_back({c.x, c.y, 0.0});
    vals.push_back(1.0 + 2.0 * c.x - 0.7 * c.y);
  }
  y = Eigen::Map<Vector>(vals.data(), static_cast<int>(vals.size()));
  MappingMatrix k = build_point_mapping(g, pts);
  PrecisionMatrix q = build_tpsmrf(g);
  for (double lambda : {1.0, std::exp(6.0), std::exp(12.0)}) {
    Vector ghat = compute_ghat(k, q, lambda, y);
    for (int i = 0; i < ghat.size(); ++i) {
      Point c = g.centroid(i);
      CHECK(std::abs(ghat(i) - (1.0 + 2.0 * c.x - 0.7 * c.y)) <= 1e-6);
    }
  }
}

TEST_CASE("posterior mean matches the dense generalized-inverse route") {
  for (auto [nx, ny, n] : {std::tuple{6, 6, 12}, std::tuple{8, 8, 18}}) {
    Problem p = make_problem(nx, ny, n, 0.2, 7);
    for (bool tps : {false, true}) {
      PrecisionMatrix q = tps ? build_tpsmrf(p.grid) : build_icar(p.grid);
      for (double lambda : {0.5, std::exp(2.0)}) {
        Vector sparse = compute_ghat(p.k, q, lambda, p.y);
        Vector dense =
            dense_ref::ghat(dense_ref::dense(p.k), dense_ref::dense(q), lambda, p.y);
        double rel = (sparse - dense).cwiseAbs().maxCoeff() / dense.cwiseAbs().maxCoeff();
        CHECK(rel <= 1e-8);
      }
    }
  }
}

TEST_CASE("log-determinant of the smoothing system matches dense pivoted factorization") {
  Problem p = make_problem(6, 6, 14, 0.2, 8);
  for (bool tps : {false, true}) {
    PrecisionMatrix q = tps ? build_tpsmrf(p.grid) : build_icar(p.grid);
    SmoothingSolver solver(p.k, q);
    for (double lambda : {0.3, 2.0, std::exp(4.0)}) {
      solver.factorize(lambda);
      double dense = dense_ref::log_det_system(dense_ref::dense(p.k), dense_ref::dense(q), lambda);
      CHECK(solver.log_det() == doctest::Approx(dense).epsilon(1e-8));
    }
  }
}

TEST_CASE("low-rank marginal precision application matches the dense projection form") {
  Problem p = make_problem(6, 6, 13, 0.2, 9);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix v(13, 4);
  for (int i = 0; i < v.size(); ++i) v(i / 4, i % 4) = gauss(rng);
  for (bool tps : {false, true}) {
    PrecisionMatrix q = tps ? build_tpsmrf(p.grid) : build_icar(p.grid);
    auto parts = dense_ref::decompose(dense_ref::dense(q));
    for (double lambda : {0.7, std::exp(3.0)}) {
      MarginalApply app = marginal_quadform_and_logdet(p.k, q, lambda, v);
      Matrix dense = dense_ref::marginal_precision(dense_ref::dense(p.k), parts, lambda) * v;
      double rel = (app.siv - dense).cwiseAbs().maxCoeff() / dense.cwiseAbs().maxCoeff();
      CHECK(rel <= 1e-8);
    }
  }
}

TEST_CASE("profiled noise variance matches the dense quadratic form") {
  Problem p = make_problem(6, 6, 15, 0.3, 11);
  for (bool tps : {false, true}) {
    PrecisionMatrix q = tps ? build_tpsmrf(p.grid) : build_icar(p.grid);
    auto parts = dense_ref::decompose(dense_ref::dense(q));
    int c = static_cast<int>(parts.null_basis.cols());
    for (double lambda : {0.5, 4.0}) {
      ProfileEstimates est = profile_beta_tau(p.k, q, lambda, Matrix(), p.y);
      Matrix prec = dense_ref::marginal_precision(dense_ref::dense(p.k), parts, lambda);
      double expected = p.y.dot(prec * p.y) / (15 - c);
      CHECK(est.beta.size() == 0);
      CHECK(est.tau2 == doctest::Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("GLS covariate estimates match the dense marginal precision") {
  Problem p = make_problem(6, 6, 16, 0.3, 12);
  PrecisionMatrix q = build_icar(p.grid);
  auto parts = dense_ref::decompose(dense_ref::dense(q));
  std::mt19937_64 rng(13);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(16, 2);
  for (int i = 0; i < 16; ++i) {
    x(i, 0) = gauss(rng);
    x(i, 1) = 0.5 * i - 4.0;
  }
  double lambda = 1.7;
  ProfileEstimates est = profile_beta_tau(p.k, q, lambda, x, p.y);
  Matrix prec = dense_ref::marginal_precision(dense_ref::dense(p.k), parts, lambda);
  Vector beta = (x.transpose() * prec * x).ldlt().solve(x.transpose() * prec * p.y);
  CHECK((est.beta - beta).cwiseAbs().maxCoeff() <= 1e-8 * beta.cwiseAbs().maxCoeff());
  Vector resid = p.y - x * beta;
  CHECK(est.tau2 == doctest::Approx(resid.dot(prec * resid) / 15.0).epsilon(1e-8));
}

TEST_CASE("noise-free covariate signal profiles to zero variance") {
  Problem p = make_problem(6, 6, 14, 0.3, 14);
  PrecisionMatrix q = build_icar(p.grid);
  std::mt19937_64 rng(15);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(14, 1);
  for (int i = 0; i < 14; ++i) x(i, 0) = gauss(rng);
  Vector y = 3.0 * x.col(0);
  ProfileEstimates est = profile_beta_tau(p.k, q, 1.0, x, y);
  CHECK(est.beta(0) == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(est.tau2 <= 1e-10);
}

TEST_CASE("an intercept column is flat under the marginal precision and drops out") {
  Problem p = make_problem(6, 6, 14, 0.3, 16);
  PrecisionMatrix q = build_icar(p.grid);
  ProfileEstimates plain = profile_beta_tau(p.k, q, 1.0, Matrix(), p.y);
  Matrix ones = Matrix::Ones(14, 1);
  ProfileEstimates with_icpt = profile_beta_tau(p.k, q, 1.0, ones, p.y);
  CHECK(std::abs(with_icpt.beta(0)) <= 1e-8);
  CHECK(with_icpt.tau2 == doctest::Approx(plain.tau2).epsilon(1e-10));
}

TEST_CASE("dependent covariate columns are rejected") {
  Problem p = make_problem(6, 6, 14, 0.3, 17);
  PrecisionMatrix q = build_icar(p.grid);
  Matrix x(14, 2);
  for (int i = 0; i < 14; ++i) x(i, 0) = x(i, 1) = 0.3 * i;
  CHECK_THROWS_AS(profile_beta_tau(p.k, q, 1.0, x, p.y), DomainError);
}

TEST_CASE("profiling requires more observations than null-space dimensions") {
  GridSpec g = unit_square_grid(6, 6);
  std::vector<PointObs> one = {{0.5, 0.5, 0.0}};
  MappingMatrix k1 = build_point_mapping(g, one);
  PrecisionMatrix q = build_icar(g);
  Vector y1(1);
  y1 << 1.0;
  CHECK_THROWS_AS(profile_beta_tau(k1, q, 1.0, Matrix(), y1), DomainError);
}

TEST_CASE("profile likelihood differences match the dense restricted likelihood") {
  Problem p = make_problem(6, 6, 15, 0.25, 18);
  for (bool tps : {false, true}) {
    PrecisionMatrix q = tps ? build_tpsmrf(p.grid) : build_icar(p.grid);
    SmoothingSolver solver(p.k, q);
    std::vector<double> lambdas = {0.2, 1.0, std::exp(3.0)};
    std::vector<double> sparse_ll, dense_ll;
    for (double lambda : lambdas) {
      solver.factorize(lambda);
      sparse_ll.push_back(profile_loglik(solver, Matrix(), p.y));
      dense_ll.push_back(dense_ref::restricted_loglik(dense_ref::dense(p.k),
                                                      dense_ref::dense(q), lambda, p.y));
    }
    for (size_t i = 1; i < lambdas.size(); ++i) {
      double ds = sparse_ll[i] - sparse_ll[0];
      double dd = dense_ll[i] - dense_ll[0];
      CHECK(ds == doctest::Approx(dd).epsilon(1e-8));
    }
  }
}

TEST_CASE("likelihood maximization finds an interior optimum no grid scan beats") {
  Problem p = make_problem(8, 8, 30, 0.3, 19);
  PrecisionMatrix q = build_icar(p.grid);
  FitResult fit = maximize_lambda(p.k, q, Matrix(), p.y, {-10.0, 20.0});
  CHECK_FALSE(fit.at_bound);
  CHECK(fit.hyper.lambda > std::exp(-10.0));
  CHECK(fit.hyper.lambda < std::exp(20.0));
  CHECK(fit.hyper.tau2 > 0.0);
  CHECK(fit.ghat.size() == 64);
  CHECK(fit.se_g.size() == 64);
  CHECK(fit.loglik_trace.size() >= 10);

  SmoothingSolver solver(p.k, q);
  double best = -1e300;
  for (int i = 0; i <= 200; ++i) {
    double ll = -10.0 + 30.0 * i / 200.0;
    solver.factorize(std::exp(ll));
    best = std::max(best, profile_loglik(solver, Matrix(), p.y));
  }
  solver.factorize(fit.hyper.lambda);
  double at_opt = profile_loglik(solver, Matrix(), p.y);
  CHECK(at_opt >= best - 1e-6);
}

TEST_CASE("pure noise pushes the smoothing parameter to the upper bound") {
  GridSpec g = unit_square_grid(8, 8);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<PointObs> pts;
  Vector y(40);
  for (int i = 0; i < 40; ++i) {
    pts.push_back({unif(rng), unif(rng), 0.0});
    y(i) = gauss(rng);
  }
  MappingMatrix k = build_point_mapping(g, pts);
  FitResult fit = maximize_lambda(k, build_icar(g), Matrix(), y, {-10.0, 20.0});
  CHECK(fit.at_bound);
  CHECK(fit.hyper.lambda == doctest::Approx(std::exp(20.0)).epsilon(1e-6));
  // At the flat limit the surface collapses onto the sample mean.
  double mean = y.mean();
  double sd = std::sqrt((y.array() - mean).square().sum() / (y.size() - 1));
  CHECK((fit.ghat.array() - mean).abs().maxCoeff() < 0.1 * sd);
}

TEST_CASE("posterior draws collapse onto the mean as noise vanishes") {
  Problem p = make_problem(6, 6, 14, 0.2, 21);
  PrecisionMatrix q = build_icar(p.grid);
  Hyperparams hyper{1.5, 1e-12};
  Vector mean = compute_ghat(p.k, q, hyper.lambda, p.y);
  Vector draw = posterior_draw_g(p.k, q, hyper, Matrix(), Vector(), p.y, 99);
  CHECK((draw - mean).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("posterior draws are deterministic per seed") {
  Problem p = make_problem(6, 6, 14, 0.2, 22);
  PrecisionMatrix q = build_icar(p.grid);
  Hyperparams hyper{1.5, 0.1};
  Vector a = posterior_draw_g(p.k, q, hyper, Matrix(), Vector(), p.y, 7);
  Vector b = posterior_draw_g(p.k, q, hyper, Matrix(), Vector(), p.y, 7);
  Vector c = posterior_draw_g(p.k, q, hyper, Matrix(), Vector(), p.y, 8);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("pointwise standard errors match the dense posterior covariance diagonal") {
  Problem p = make_problem(6, 6, 14, 0.2, 23);
  for (bool tps : {false, true}) {
    PrecisionMatrix q = tps ? build_tpsmrf(p.grid) : build_icar(p.grid);
    Hyperparams hyper{2.0, 0.09};
    PointwiseSe se = pointwise_se(p.k, q, hyper);
    CHECK_FALSE(se.stochastic);
    Matrix cov = hyper.tau2 *
                 dense_ref::posterior_cov(dense_ref::dense(p.k), dense_ref::dense(q), hyper.lambda);
    for (int i = 0; i < se.se.size(); ++i) {
      CHECK(se.se(i) >= 0.0);
      CHECK(se.se(i) == doctest::Approx(std::sqrt(cov(i, i))).epsilon(1e-9));
    }
  }
}

TEST_CASE("stochastic variance estimation stays close to the exact diagonal") {
  Problem p = make_problem(20, 20, 100, 0.3, 24);
  for (bool tps : {false, true}) {
    PrecisionMatrix q = tps ? build_tpsmrf(p.grid) : build_icar(p.grid);
    Hyperparams hyper{3.0, 0.09};
    PointwiseSe exact = pointwise_se(p.k, q, hyper);
    PointwiseSe stoch = pointwise_se(p.k, q, hyper, 10);
    CHECK_FALSE(exact.stochastic);
    CHECK(stoch.stochastic);
    double max_rel = 0.0;
    for (int i = 0; i < exact.se.size(); ++i)
      max_rel = std::max(max_rel, std::abs(stoch.se(i) - exact.se(i)) / exact.se(i));
    CHECK(max_rel <= 0.05);
  }
}
