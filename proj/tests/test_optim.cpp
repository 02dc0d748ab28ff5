#include <doctest.h>

#include <cmath>

#include "gridmrf/optim.hpp"

using namespace gridmrf;

TEST_CASE("golden section locates an interior quadratic maximum") {
  auto f = [](double x) { return -(x - 2.0) * (x - 2.0); };
  GoldenResult r = golden_section_max(f, 0.0, 5.0, 1e-5);
  CHECK(std::abs(r.x - 2.0) <= 1e-4);
  CHECK(r.fx <= 0.0);
  CHECK_FALSE(r.at_lower);
  CHECK_FALSE(r.at_upper);
}

TEST_CASE("golden section flags maxima on the bounds") {
  auto inc = [](double x) { return x; };
  GoldenResult hi = golden_section_max(inc, 0.0, 3.0, 1e-4);
  CHECK(hi.at_upper);
  CHECK(hi.x == 3.0);
  auto dec = [](double x) { return -x; };
  GoldenResult lo = golden_section_max(dec, 0.0, 3.0, 1e-4);
  CHECK(lo.at_lower);
  CHECK(lo.x == 0.0);
}

TEST_CASE("golden section records every evaluation including the endpoints") {
  auto f = [](double x) { return -std::pow(x - 1.3, 2.0); };
  GoldenResult r = golden_section_max(f, -1.0, 4.0, 1e-3);
  bool saw_lo = false, saw_hi = false;
  for (auto [x, fx] : r.trace) {
    CHECK(fx == f(x));
    if (x == -1.0) saw_lo = true;
    if (x == 4.0) saw_hi = true;
  }
  CHECK(saw_lo);
  CHECK(saw_hi);
  CHECK(r.trace.size() >= 10);
}

TEST_CASE("golden section handles asymmetric unimodal functions") {
  auto f = [](double x) { return -std::abs(x - 2.7) * (1.0 + 0.5 * (x - 2.7) * (x - 2.7)); };
  GoldenResult r = golden_section_max(f, 0.0, 10.0, 1e-6);
  CHECK(std::abs(r.x - 2.7) <= 1e-5);
}

TEST_CASE("simplex minimization solves a shifted quadratic") {
  auto f = [](const Vector& v) {
    double a = v(0) - 1.5, b = v(1) + 0.5;
    return a * a + 3.0 * b * b + 0.2 * a * b;
  };
  Vector x0 = Vector::Zero(2);
  NelderMeadResult r = nelder_mead_min(f, x0, 0.5, 1e-12, 500);
  CHECK(r.converged);
  CHECK(std::abs(r.x(0) - 1.5) <= 1e-4);
  CHECK(std::abs(r.x(1) + 0.5) <= 1e-4);
  CHECK(r.evals <= 500);
}

TEST_CASE("simplex minimization makes progress on the banana function") {
  auto f = [](const Vector& v) {
    double a = 1.0 - v(0), b = v(1) - v(0) * v(0);
    return a * a + 100.0 * b * b;
  };
  Vector x0(2);
  x0 << -1.2, 1.0;
  NelderMeadResult r = nelder_mead_min(f, x0, 0.5, 1e-10, 2000);
  CHECK(r.fx <= 1e-4);
  CHECK(std::abs(r.x(0) - 1.0) <= 0.05);
  CHECK(std::abs(r.x(1) - 1.0) <= 0.05);
}
