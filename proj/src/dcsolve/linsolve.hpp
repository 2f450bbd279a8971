#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "dcopt/grid.hpp"

namespace dcopt::detail {

/// LU factorization of a square system, dense or sparse.
class LinearSolver {
 public:
  using SpMat = Eigen::SparseMatrix<double>;

  /// Returns false when the factorization broke down or, if `rcond_min` > 0,
  /// the dense reciprocal condition estimate falls below it.
  bool factorize(const SpMat& k, bool dense, double rcond_min = 0.0);

  Vector solve(const Vector& b) const;
  Vector solve_transpose(const Vector& b) const;
  Eigen::Index size() const { return n_; }

 private:
  bool dense_ = true;
  Eigen::Index n_ = 0;
  Eigen::PartialPivLU<Eigen::MatrixXd> dense_lu_;
  Eigen::SparseLU<SpMat> sparse_lu_;
  bool pattern_ready_ = false;
};

}  // namespace dcopt::detail
