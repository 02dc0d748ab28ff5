#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gridmrf/grid.hpp"
#include "gridmrf/precision.hpp"
#include "gridmrf/spectral.hpp"

using namespace gridmrf;

TEST_CASE("implied prior spectra drop exactly the null-space eigenvalues") {
  GridSpec g = unit_square_grid(8, 8);
  EigenCurve icar = eigencurve_mrf(g, build_icar(g), 1, "icar");
  EigenCurve tps = eigencurve_mrf(g, build_tpsmrf(g), 1, "tpsmrf");
  CHECK(icar.values.size() == 63);
  CHECK(tps.values.size() == 61);
  CHECK(std::is_sorted(icar.values.rbegin(), icar.values.rend()));
  CHECK(std::is_sorted(tps.values.rbegin(), tps.values.rend()));
}

TEST_CASE("spectrum normalization pins the reference index to one") {
  GridSpec g = unit_square_grid(10, 10);
  EigenCurve curve = eigencurve_mrf(g, build_icar(g), 7, "icar");
  CHECK(curve.normalize_index == 7);
  CHECK(curve.values[6] == 1.0);
  CHECK(curve.values[0] >= 1.0);
}

TEST_CASE("rescaling the precision leaves the normalized spectrum unchanged") {
  GridSpec g = unit_square_grid(9, 9);
  PrecisionMatrix q = build_icar(g);
  PrecisionMatrix scaled = q;
  scaled.mat = q.mat * 7.0;
  EigenCurve a = eigencurve_mrf(g, q, 5, "icar");
  EigenCurve b = eigencurve_mrf(g, scaled, 5, "icar");
  REQUIRE(a.values.size() == b.values.size());
  for (size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-10));
}

TEST_CASE("out-of-range normalization indices are rejected") {
  GridSpec g = unit_square_grid(6, 6);
  PrecisionMatrix q = build_icar(g);
  CHECK_THROWS_AS(eigencurve_mrf(g, q, 0, "icar"), DomainError);
  CHECK_THROWS_AS(eigencurve_mrf(g, q, 36, "icar"), DomainError);  // only 35 survive
  CHECK_NOTHROW(eigencurve_mrf(g, q, 35, "icar"));
}

TEST_CASE("dense spectral work refuses oversized grids") {
  GridSpec g = unit_square_grid(81, 81);
  PrecisionMatrix q = build_icar(g);
  CHECK_THROWS_AS(eigencurve_mrf(g, q, 100, "icar"), SizeError);
  MaternParams p{0.5, 0.1, 1.0};
  CHECK_THROWS_AS(eigencurve_gp(g, p, 100, "gp"), SizeError);
  CHECK_THROWS_AS(equivalent_kernel_gp(g, p, 1.0, 0), SizeError);
}

TEST_CASE("tail decay orders the families as smoothness dictates") {
  // Mirrors the production-size comparison at reduced scale: the thin-plate
  // spectrum decays fastest, wider CAR neighborhoods decay slower than the
  // first-order CAR.
  GridSpec g = unit_square_grid(40, 40);
  int norm = 100, probe = 1000;
  auto val = [&](const PrecisionMatrix& q) {
    EigenCurve c = eigencurve_mrf(g, q, norm, "x");
    REQUIRE(static_cast<int>(c.values.size()) >= probe);
    return c.values[probe - 1];
  };
  double icar = val(build_icar(g));
  double hicar3 = val(build_hicar(g, 3.0));
  double dicar5 = val(build_dicar(g, 5.0));
  double tps = val(build_tpsmrf(g));
  CHECK(tps < icar);
  CHECK(icar < hicar3);
  CHECK(icar < dicar5);
}

TEST_CASE("gp spectra follow the same normalization rules") {
  GridSpec tiny = unit_square_grid(1, 1);
  MaternParams p{0.5, 0.1, 1.0};
  EigenCurve single = eigencurve_gp(tiny, p, 1, "gp");
  REQUIRE(single.values.size() == 1);
  CHECK(single.values[0] == 1.0);

  GridSpec g = unit_square_grid(30, 30);
  MaternParams rough{0.5, 0.1, 1.0};
  MaternParams smooth{2.0, 0.1, 1.0};
  EigenCurve a = eigencurve_gp(g, rough, 50, "exp");
  EigenCurve b = eigencurve_gp(g, smooth, 50, "smooth");
  CHECK(a.values.size() == 900);
  CHECK(a.values[49] == 1.0);
  // The rougher process holds more relative mass deep in the spectrum.
  CHECK(a.values[599] > b.values[599]);
}

TEST_CASE("smoothing kernel rows sum to one for every family") {
  GridSpec g = unit_square_grid(40, 40);
  double lambda = std::exp(4.0);
  int focal = g.index(20, 20);
  for (const auto& q :
       {build_icar(g), build_hicar(g, 3.0), build_dicar(g, 5.0), build_tpsmrf(g)}) {
    KernelSlice slice = equivalent_kernel_mrf(g, q, lambda, focal);
    CHECK(slice.focal == focal);
    CHECK(std::abs(slice.weights.sum() - 1.0) <= 1e-10);
  }
}

TEST_CASE("vanishing smoothing concentrates the kernel on the focal cell") {
  GridSpec g = unit_square_grid(20, 20);
  PrecisionMatrix q = build_icar(g);
  KernelSlice slice = equivalent_kernel_mrf(g, q, 1e-8, g.index(10, 10));
  CHECK(slice.weights(g.index(10, 10)) >= 0.999);
}

TEST_CASE("thin-plate kernels develop negative sidelobes; CAR kernels peak centrally") {
  GridSpec g = unit_square_grid(40, 40);
  double lambda = std::exp(4.0);
  int focal = g.index(20, 20);
  KernelSlice tps = equivalent_kernel_mrf(g, build_tpsmrf(g), lambda, focal);
  CHECK(tps.weights.minCoeff() < 0.0);
  KernelSlice icar = equivalent_kernel_mrf(g, build_icar(g), lambda, focal);
  double center = icar.weights(focal);
  CHECK(center > icar.weights(g.index(20, 21)));
  CHECK(center > icar.weights(g.index(20, 19)));
  CHECK(center > icar.weights(g.index(21, 20)));
  CHECK(center > icar.weights(g.index(19, 20)));
}

TEST_CASE("kernel weights are symmetric under focal exchange") {
  GridSpec g = unit_square_grid(15, 15);
  PrecisionMatrix q = build_tpsmrf(g);
  double lambda = std::exp(2.0);
  int a = g.index(7, 7), b = g.index(4, 10);
  KernelSlice ka = equivalent_kernel_mrf(g, q, lambda, a);
  KernelSlice kb = equivalent_kernel_mrf(g, q, lambda, b);
  CHECK(ka.weights(b) == doctest::Approx(kb.weights(a)).epsilon(1e-9));
}

TEST_CASE("first-order CAR kernels carry heavier tails than thin-plate kernels") {
  GridSpec g = unit_square_grid(40, 40);
  double lambda = std::exp(4.0);
  int focal = g.index(20, 20);
  auto tail_mass = [&](const KernelSlice& s) {
    double mass = 0.0;
    for (int i = 0; i < s.weights.size(); ++i) {
      double dr = g.row_of(i) - 20.0, dc = g.col_of(i) - 20.0;
      if (std::sqrt(dr * dr + dc * dc) > 10.0) mass += std::abs(s.weights(i));
    }
    return mass;
  };
  KernelSlice icar = equivalent_kernel_mrf(g, build_icar(g), lambda, focal);
  KernelSlice tps = equivalent_kernel_mrf(g, build_tpsmrf(g), lambda, focal);
  CHECK(tail_mass(icar) > tail_mass(tps));
}

TEST_CASE("kernel transects report offsets along the focal row") {
  GridSpec g = unit_square_grid(12, 12);
  PrecisionMatrix q = build_icar(g);
  int focal = g.index(5, 4);
  KernelSlice slice = equivalent_kernel_mrf(g, q, 2.0, focal);
  REQUIRE(slice.cross_x.size() == 12);
  REQUIRE(slice.cross_weights.size() == 12);
  for (int c = 0; c < 12; ++c) {
    CHECK(slice.cross_x[c] == doctest::Approx(c - 4.0).epsilon(1e-12));
    CHECK(slice.cross_weights[c] == slice.weights(g.index(5, c)));
  }
}

TEST_CASE("gp kernels sharpen with rougher processes") {
  GridSpec g = unit_square_grid(25, 25);
  double lambda = 1.0;
  int focal = g.index(12, 12);
  MaternParams rough{0.5, 0.15, 1.0};
  MaternParams smooth{2.0, 0.15, 1.0};
  KernelSlice kr = equivalent_kernel_gp(g, rough, lambda, focal);
  KernelSlice ks = equivalent_kernel_gp(g, smooth, lambda, focal);
  double contrast_r = kr.weights(focal) / kr.weights(g.index(12, 13));
  double contrast_s = ks.weights(focal) / ks.weights(g.index(12, 13));
  CHECK(contrast_r > contrast_s);
  KernelSlice tiny = equivalent_kernel_gp(g, rough, 1e-10, focal);
  CHECK(tiny.weights(focal) >= 0.999);
}
