#include "gridmrf/precision.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace gridmrf {

const char* family_name(MrfFamily family) {
  switch (family) {
    case MrfFamily::Icar: return "icar";
    case MrfFamily::Hicar: return "hicar";
    case MrfFamily::Dicar: return "dicar";
    case MrfFamily::TpsMrf: return "tpsmrf";
  }
  throw DomainError("unknown MRF family");
}

MrfFamily family_from_name(const std::string& name) {
  if (name == "icar") return MrfFamily::Icar;
  if (name == "hicar") return MrfFamily::Hicar;
  if (name == "dicar") return MrfFamily::Dicar;
  if (name == "tpsmrf") return MrfFamily::TpsMrf;
  throw DomainError("unknown MRF family '" + name + "'");
}

namespace {

struct Offset {
  int dr;
  int dc;
  double dist;
};

// Lattice offsets with centroid distance in (0, max_dist].  Distances are in
// cell-width units when dx == dy, raw Euclidean otherwise.  The comparison
// carries a relative slop so offsets landing exactly on the cutoff count.
std::vector<Offset> neighbor_offsets(const GridSpec& grid, double max_dist) {
  bool isotropic = grid.dx == grid.dy;
  double ux = isotropic ? 1.0 : grid.dx;
  double uy = isotropic ? 1.0 : grid.dy;
  int reach_c = static_cast<int>(std::ceil(max_dist / ux));
  int reach_r = static_cast<int>(std::ceil(max_dist / uy));
  double cutoff2 = max_dist * max_dist * (1.0 + 1e-12);
  std::vector<Offset> offsets;
  for (int dr = -reach_r; dr <= reach_r; ++dr) {
    for (int dc = -reach_c; dc <= reach_c; ++dc) {
      if (dr == 0 && dc == 0) continue;
      double d2 = dc * ux * dc * ux + dr * uy * dr * uy;
      if (d2 <= cutoff2) offsets.push_back({dr, dc, std::sqrt(d2)});
    }
  }
  return offsets;
}

PrecisionMatrix build_weighted(const GridSpec& grid, MrfFamily family, double max_dist,
                               const std::function<double(double)>& weight) {
  grid.validate();
  if (grid.nx < 2 || grid.ny < 2) throw DomainError("grid must be at least 2x2");
  auto offsets = neighbor_offsets(grid, max_dist);
  int m = grid.cells();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(m) * (offsets.size() + 1));
  for (int cell = 0; cell < m; ++cell) {
    int r = grid.row_of(cell), c = grid.col_of(cell);
    double diag = 0.0;
    for (const auto& o : offsets) {
      int rr = r + o.dr, cc = c + o.dc;
      if (rr < 0 || rr >= grid.ny || cc < 0 || cc >= grid.nx) continue;
      double w = weight(o.dist);
      trips.emplace_back(cell, grid.index(rr, cc), -w);
      diag += w;
    }
    trips.emplace_back(cell, cell, diag);
  }
  PrecisionMatrix Q;
  Q.family = family;
  Q.null_dim = 1;
  Q.grid = grid;
  Q.mat.resize(m, m);
  Q.mat.setFromTriplets(trips.begin(), trips.end());
  return Q;
}

}  // namespace

PrecisionMatrix build_icar(const GridSpec& grid) {
  auto Q = build_weighted(grid, MrfFamily::Icar, 1.0, [](double) { return 1.0; });
  return Q;
}

PrecisionMatrix build_hicar(const GridSpec& grid, double max_dist) {
  if (!(max_dist >= 1.0)) throw DomainError("max_dist must be >= 1");
  return build_weighted(grid, MrfFamily::Hicar, max_dist, [](double) { return 1.0; });
}

double dicar_weight(double d, double r) {
  if (!(r > 1.0)) throw DomainError("weight support r must be > 1");
  if (!(d > 0.0)) throw DomainError("distance must be positive");
  return std::pow(d, std::log(0.05) / std::log(r));
}

PrecisionMatrix build_dicar(const GridSpec& grid, double r) {
  if (!(r > 1.0)) throw DomainError("weight support r must be > 1");
  double expo = std::log(0.05) / std::log(r);
  auto Q = build_weighted(grid, MrfFamily::Dicar, r,
                          [expo](double d) { return std::pow(d, expo); });
  return Q;
}

SpMat second_difference_1d(int n) {
  if (n < 3) throw DomainError("second differences need at least 3 cells");
  SpMat D(n - 2, n);
  std::vector<Triplet> trips;
  trips.reserve(3 * (n - 2));
  for (int i = 0; i < n - 2; ++i) {
    trips.emplace_back(i, i, 1.0);
    trips.emplace_back(i, i + 1, -2.0);
    trips.emplace_back(i, i + 2, 1.0);
  }
  D.setFromTriplets(trips.begin(), trips.end());
  return D;
}

PrecisionMatrix build_tpsmrf(const GridSpec& grid) {
  grid.validate();
  if (grid.nx < 4 || grid.ny < 4) {
    throw DomainError("thin-plate penalty needs nx, ny >= 4, got " + std::to_string(grid.nx) +
                      "x" + std::to_string(grid.ny));
  }
  int nx = grid.nx, ny = grid.ny, m = grid.cells();

  std::vector<Triplet> tx, ty, txy;
  // Second differences along x (per row) and y (per column).
  tx.reserve(3 * ny * (nx - 2));
  for (int r = 0; r < ny; ++r) {
    for (int c = 1; c < nx - 1; ++c) {
      int row = r * (nx - 2) + (c - 1);
      tx.emplace_back(row, grid.index(r, c - 1), 1.0);
      tx.emplace_back(row, grid.index(r, c), -2.0);
      tx.emplace_back(row, grid.index(r, c + 1), 1.0);
    }
  }
  ty.reserve(3 * nx * (ny - 2));
  for (int c = 0; c < nx; ++c) {
    for (int r = 1; r < ny - 1; ++r) {
      int row = c * (ny - 2) + (r - 1);
      ty.emplace_back(row, grid.index(r - 1, c), 1.0);
      ty.emplace_back(row, grid.index(r, c), -2.0);
      ty.emplace_back(row, grid.index(r + 1, c), 1.0);
    }
  }
  // Cross differences on 2x2 blocks; these enter the quadratic form with
  // weight 2, applied after the product so all entries stay integer-exact.
  txy.reserve(4 * (ny - 1) * (nx - 1));
  for (int r = 0; r < ny - 1; ++r) {
    for (int c = 0; c < nx - 1; ++c) {
      int row = r * (nx - 1) + c;
      txy.emplace_back(row, grid.index(r, c), 1.0);
      txy.emplace_back(row, grid.index(r, c + 1), -1.0);
      txy.emplace_back(row, grid.index(r + 1, c), -1.0);
      txy.emplace_back(row, grid.index(r + 1, c + 1), 1.0);
    }
  }

  SpMat Dx(ny * (nx - 2), m), Dy(nx * (ny - 2), m), Dxy((ny - 1) * (nx - 1), m);
  Dx.setFromTriplets(tx.begin(), tx.end());
  Dy.setFromTriplets(ty.begin(), ty.end());
  Dxy.setFromTriplets(txy.begin(), txy.end());

  PrecisionMatrix Q;
  Q.family = MrfFamily::TpsMrf;
  Q.null_dim = 3;
  Q.grid = grid;
  Q.mat = SpMat(Dx.transpose() * Dx) + SpMat(Dy.transpose() * Dy) +
          2.0 * SpMat(Dxy.transpose() * Dxy);
  Q.mat.prune([](int, int, double v) { return v != 0.0; });
  return Q;
}

int null_space_dim(const PrecisionMatrix& Q) { return Q.null_dim; }

}  // namespace gridmrf
