#include "linsolve.hpp"

namespace dcopt::detail {

bool LinearSolver::factorize(const SpMat& k, bool dense, double rcond_min) {
  if (dense_ != dense || n_ != k.rows()) pattern_ready_ = false;
  dense_ = dense;
  n_ = k.rows();
  if (dense) {
    dense_lu_.compute(Eigen::MatrixXd(k));
    if (rcond_min <= 0.0 || n_ == 0) return true;
    // rcond() skips exact zero pivots, so test the pivot spread as well.
    const Vector pivots = dense_lu_.matrixLU().diagonal().cwiseAbs();
    if (!(pivots.minCoeff() >= rcond_min * pivots.maxCoeff())) return false;
    return dense_lu_.rcond() >= rcond_min;
  }
  if (!pattern_ready_) {
    sparse_lu_.analyzePattern(k);
    pattern_ready_ = true;
  }
  sparse_lu_.factorize(k);
  return sparse_lu_.info() == Eigen::Success;
}

Vector LinearSolver::solve(const Vector& b) const {
  if (dense_) return dense_lu_.solve(b);
  return const_cast<Eigen::SparseLU<SpMat>&>(sparse_lu_).solve(b);
}

Vector LinearSolver::solve_transpose(const Vector& b) const {
  if (dense_) return dense_lu_.transpose().solve(b);
  return const_cast<Eigen::SparseLU<SpMat>&>(sparse_lu_).transpose().solve(b);
}

}  // namespace dcopt::detail
