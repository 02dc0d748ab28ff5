#include "gridmrf/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <string>

namespace gridmrf {

namespace {

constexpr int kDenseGuard = 6400;

void check_dense_size(int m) {
  if (m > kDenseGuard) {
    throw SizeError("dense spectral analysis limited to " + std::to_string(kDenseGuard) +
                    " cells, got " + std::to_string(m) + "; use a smaller grid");
  }
}

EigenCurve scale_curve(std::vector<double> values, int normalize_index,
                       const std::string& label) {
  if (normalize_index < 1 || normalize_index > static_cast<int>(values.size())) {
    throw DomainError("normalize_index " + std::to_string(normalize_index) +
                      " outside the " + std::to_string(values.size()) + " finite eigenvalues");
  }
  double ref = values[normalize_index - 1];
  if (ref == 0.0) throw NumericError("eigenvalue at the normalization index is zero");
  for (auto& v : values) v /= ref;
  EigenCurve curve;
  curve.values = std::move(values);
  curve.normalize_index = normalize_index;
  curve.label = label;
  return curve;
}

}  // namespace

EigenCurve eigencurve_mrf(const GridSpec& grid, const PrecisionMatrix& Q, int normalize_index,
                          const std::string& label) {
  (void)grid;
  check_dense_size(Q.m());
  Matrix dense = Matrix(Q.mat);
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.compute(dense, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Vector& ev = es.eigenvalues();  // ascending
  double emax = ev.cwiseAbs().maxCoeff();
  // Null-space eigenvalues would invert to infinities; they are dropped.
  std::vector<double> inv;
  inv.reserve(ev.size());
  for (int i = static_cast<int>(ev.size()) - 1; i >= 0; --i) {
    if (ev(i) > 1e-8 * emax) inv.push_back(1.0 / ev(i));
  }
  std::reverse(inv.begin(), inv.end());  // descending inverse eigenvalues
  return scale_curve(std::move(inv), normalize_index, label);
}

EigenCurve eigencurve_gp(const GridSpec& grid, const MaternParams& params, int normalize_index,
                         const std::string& label) {
  grid.validate();
  check_dense_size(grid.cells());
  auto locs = grid_centroids(grid);
  Matrix R = build_corr_matrix(locs, params);
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.compute(R, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  std::vector<double> vals(ev.size());
  for (int i = 0; i < ev.size(); ++i) vals[i] = ev(ev.size() - 1 - i);
  return scale_curve(std::move(vals), normalize_index, label);
}

namespace {

KernelSlice make_slice(const GridSpec& grid, int focal, double lambda, Vector weights) {
  KernelSlice slice;
  slice.focal = focal;
  slice.lambda = lambda;
  slice.weights = std::move(weights);
  int frow = grid.row_of(focal), fcol = grid.col_of(focal);
  double ux = grid.dx == grid.dy ? 1.0 : grid.dx;  // cell units when isotropic
  slice.cross_x.reserve(grid.nx);
  slice.cross_weights.reserve(grid.nx);
  for (int c = 0; c < grid.nx; ++c) {
    slice.cross_x.push_back((c - fcol) * ux);
    slice.cross_weights.push_back(slice.weights(grid.index(frow, c)));
  }
  return slice;
}

}  // namespace

KernelSlice equivalent_kernel_mrf(const GridSpec& grid, const PrecisionMatrix& Q, double lambda,
                                  int focal_cell) {
  grid.validate();
  if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
  if (Q.m() != grid.cells()) throw DomainError("precision size does not match grid");
  if (focal_cell < 0 || focal_cell >= Q.m()) throw DomainError("focal cell out of range");
  SpMat A = lambda * Q.mat;
  for (int i = 0; i < Q.m(); ++i) A.coeffRef(i, i) += 1.0;
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NumericError("kernel system factorization failed");
  Vector e = Vector::Zero(Q.m());
  e(focal_cell) = 1.0;
  Vector w = ldlt.solve(e);
  // One refinement step; the raw solve can miss the row-sum tolerance at
  // large lambda.
  w += ldlt.solve(Vector(e - A * w));
  return make_slice(grid, focal_cell, lambda, std::move(w));
}

KernelSlice equivalent_kernel_gp(const GridSpec& grid, const MaternParams& params, double lambda,
                                 int focal_cell) {
  grid.validate();
  check_dense_size(grid.cells());
  if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
  if (focal_cell < 0 || focal_cell >= grid.cells()) {
    throw DomainError("focal cell out of range");
  }
  auto locs = grid_centroids(grid);
  Matrix R = build_corr_matrix(locs, params);
  // S = (lambda R^{-1} + I)^{-1} = R (R + lambda I)^{-1}; the row solve works
  // on the second form, which needs no inverse of R.
  Matrix M = R;
  M.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw NumericError("kernel system factorization failed");
  Vector e = Vector::Zero(grid.cells());
  e(focal_cell) = 1.0;
  // Row of S at the focal cell: S^T e = (R + lambda I)^{-1} R e (S symmetric).
  Vector w = ldlt.solve(R * e);
  return make_slice(grid, focal_cell, lambda, std::move(w));
}

}  // namespace gridmrf
