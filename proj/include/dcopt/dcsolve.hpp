#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "dcopt/grid.hpp"

namespace dcopt {

/// Row and column positions of the DC-OPF QP.
///
/// Variables: x = [pg (machines); theta (buses)].
/// Equalities: balance row per bus, one reference row, one row per machine
/// with pmin == pmax.
/// Inequalities: flow upper per branch, flow lower per branch, then upper and
/// lower dispatch bounds for each machine that is not fixed.
struct QpLayout {
  std::size_t num_buses = 0;
  std::size_t num_branches = 0;
  std::size_t num_generators = 0;
  std::vector<std::size_t> fixed_generators;     // machines pinned by an equality row
  std::vector<std::size_t> bounded_generators;   // machines with a pair of box rows

  std::size_t num_vars() const { return num_generators + num_buses; }
  std::size_t num_eq() const { return num_buses + 1 + fixed_generators.size(); }
  std::size_t num_ineq() const { return 2 * num_branches + 2 * bounded_generators.size(); }

  std::size_t pg_var(std::size_t g) const { return g; }
  std::size_t theta_var(std::size_t i) const { return num_generators + i; }
  std::size_t balance_row(std::size_t i) const { return i; }
  std::size_t reference_row() const { return num_buses; }
  std::size_t flow_upper_row(std::size_t e) const { return e; }
  std::size_t flow_lower_row(std::size_t e) const { return num_branches + e; }
  std::size_t box_upper_row(std::size_t k) const { return 2 * num_branches + k; }
  std::size_t box_lower_row(std::size_t k) const { return 2 * num_branches + bounded_generators.size() + k; }
};

/// Where the parameters enter the constraint data. b_e scales the Laplacian
/// A^T diag(b) A in the balance rows and the flow rows of branch e; gamma_i
/// shifts the right-hand side of balance row i; rho_e shifts the balance
/// right-hand side of both end buses (through A^T) and both flow rows.
struct ParameterBindings {
  SparseMatrix incidence;  // A, |E| x |N|
  std::vector<std::size_t> from, to;

  /// Right-hand-side entries (equality, inequality) touched by rho_e.
  std::vector<std::size_t> rho_eq_rows(std::size_t e) const { return {from[e], to[e]}; }
  std::vector<std::size_t> rho_ineq_rows(std::size_t e) const { return {e, from.size() + e}; }
};

/// min 1/2 x^T diag(h) x + c^T x  s.t.  A_eq x = b_eq,  G x <= h_ineq.
struct QpProblem {
  QpLayout layout;
  ParameterBindings bindings;
  Vector hdiag;
  Vector c;
  double c0 = 0.0;
  SparseMatrix a_eq;
  Vector b_eq;
  SparseMatrix g;
  Vector h;
  Vector curvature_floor;  // part of hdiag added for zero-c2 machines
};

/// Curvature added on the dispatch block for machines with c2 = 0, in $/p.u.^2.
inline constexpr double kCurvatureFloor = 1e-8;

QpProblem build_qp(const NetworkModel& net, const DcParams& params, const Vector& pd);

enum class RowActivity { Inactive, Active, Degenerate };

struct QpOptions {
  double tol = 1e-9;
  int max_iter = 100;
  double act_tol = 1e-7;
  /// Dense factorization up to this many buses, sparse above.
  std::size_t dense_bus_limit = 40;
  /// Re-solve the equality-constrained problem on the identified active set.
  bool polish = true;
};

struct QpSolution {
  Vector x;
  Vector y;      // equality multipliers
  Vector z;      // inequality multipliers, >= 0
  Vector slack;  // h - G x
  double objective = 0.0;
  int iterations = 0;
  bool polished = false;
  std::vector<RowActivity> activity;
  std::size_t degenerate_rows = 0;
  double residual = 0.0;  // max of primal, dual, complementarity residuals
};

/// Primal-dual interior point (Mehrotra predictor-corrector) followed by an
/// optional active-set polish. Throws PrimalInfeasible, Unbounded or MaxIterations.
QpSolution solve_qp(const QpProblem& qp, const QpOptions& options = {});

/// Slack normalized by the size of its right-hand side.
double normalized_slack(const QpProblem& qp, const QpSolution& sol, std::size_t row);

struct DcOpfSolution {
  Vector pg;
  Vector theta;
  Vector flow;      // diag(b) A theta + rho
  Vector nu;        // balance-row multipliers
  Vector lambda_up;  // flow-row multipliers
  Vector lambda_lo;
  double objective = 0.0;  // sum c2 p^2 + c1 p + c0, without the curvature floor
  /// Set when a row is degenerate or a zero-c2 machine relies on the curvature floor.
  bool degenerate = false;
  QpProblem problem;
  QpSolution solution;
};

DcOpfSolution solve_dcopf(const NetworkModel& net, const DcParams& params, const Vector& pd,
                          const QpOptions& options = {});

/// Generation cost of a dispatch.
double dispatch_cost(const NetworkModel& net, const Vector& pg);

}  // namespace dcopt
