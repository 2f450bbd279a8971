#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "dcopt/dcsolve.hpp"

namespace dcopt {

/// How rows with both multiplier and slack at zero are handled.
enum class DegeneracyPolicy {
  Strict,   // throw SingularKkt
  Resolve,  // treat the row as inactive and count it
};

struct KktOptions {
  DegeneracyPolicy policy = DegeneracyPolicy::Resolve;
  /// Largest admissible QpSolution::residual.
  double residual_tol = 1e-8;
  /// When > 0, adds +delta on the primal block and -delta on the multiplier
  /// blocks, which keeps the system solvable without strict complementarity.
  double regularization = 0.0;
  std::size_t dense_bus_limit = 40;
  double rcond_min = 1e-14;
};

/// Reduced KKT system at a QP optimum. Active inequality rows are pinned as
/// equalities and inactive rows are dropped:
///
///   [ H    A^T  G_a^T ] [dx ]
///   [ A    0    0     ] [dy ]  = rhs
///   [ G_a  0    0     ] [dza]
///
/// The matrix is symmetric, so one factorization serves forward and adjoint
/// solves. Immutable after assembly.
class KktSystem {
 public:
  KktSystem(KktSystem&&) noexcept;
  KktSystem& operator=(KktSystem&&) noexcept;
  ~KktSystem();

  const QpLayout& layout() const { return layout_; }
  /// Inequality rows pinned in the system, ascending.
  const std::vector<std::size_t>& active_rows() const { return active_; }
  /// Rows classified degenerate and resolved as inactive.
  std::size_t degenerate_resolved() const { return degenerate_; }
  bool regularized() const { return regularization_ > 0.0; }
  Eigen::Index dimension() const;

  /// Dense copy of the assembled matrix.
  Eigen::MatrixXd matrix() const;
  /// Solves K v = rhs. Throws SingularKkt if the solve is inaccurate.
  Vector solve(const Vector& rhs) const;

  /// Derivative of the residual (kkt_residual) with respect to the parameters,
  /// applied to a direction (db, dgamma, drho).
  Vector param_jacobian_action(const DcParams& direction) const;

 private:
  friend KktSystem assemble_kkt(const QpProblem&, const QpSolution&, const KktOptions&);
  friend DcParams adjoint_gradient(const KktSystem&, const Vector&);
  friend Vector kkt_residual(const KktSystem&, const QpProblem&, const QpSolution&);
  struct Factor;
  KktSystem();

  QpLayout layout_;
  Eigen::Index nx_ = 0;   // variables
  Eigen::Index neq_ = 0;  // equality rows
  SparseMatrix incidence_;
  std::vector<std::size_t> active_;
  std::size_t degenerate_ = 0;
  double regularization_ = 0.0;
  SparseMatrix k_;
  Vector u_;       // A theta*
  Vector w_;       // A y_balance
  Vector mu_;      // z_up - z_lo on active flow rows
  std::unique_ptr<Factor> factor_;
};

/// Throws NotOptimal when the solution residual exceeds the tolerance and
/// SingularKkt on a degenerate row (Strict) or a singular system.
KktSystem assemble_kkt(const QpProblem& qp, const QpSolution& sol, const KktOptions& options = {});

/// seed^T (dpg/db, dpg/dgamma, dpg/drho) for a seed over machines, from one
/// solve with the KKT matrix.
DcParams adjoint_gradient(const KktSystem& kkt, const Vector& seed);

/// dpg along a parameter direction.
Vector forward_directional(const KktSystem& kkt, const DcParams& direction);

/// Reduced KKT residual of `qp` evaluated at the primal-dual point of `point`,
/// using the rows pinned in `kkt`. Ordered [stationarity; equalities; active rows].
Vector kkt_residual(const KktSystem& kkt, const QpProblem& qp, const QpSolution& point);

}  // namespace dcopt
