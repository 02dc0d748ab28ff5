#ifndef GRIDMRF_TYPES_HPP
#define GRIDMRF_TYPES_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace gridmrf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Invalid user input or model precondition violation.  The CLI maps this to
// exit code 2.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Problem too large for the requested (dense) computation.
struct SizeError : DomainError {
  using DomainError::DomainError;
};

// Factorization/optimization breakdown on structurally valid input.  The CLI
// maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gridmrf

#endif
