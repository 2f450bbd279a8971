#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dcopt/acflow.hpp"
#include "dcopt/grid.hpp"

namespace dcopt {

/// Machine setpoints for a power flow: active output and voltage setpoint per machine.
struct Dispatch {
  Vector pg;
  Vector vset;
};

/// Case-file setpoints (pg0, vg).
Dispatch case_dispatch(const NetworkModel& net);

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 50;
  /// Warm start; a flat start (v = 1 at PQ buses, theta = 0) is used when empty.
  std::optional<AcState> initial;
};

struct PowerFlowResult {
  AcState state;
  int iterations = 0;
  double mismatch = 0.0;  // max |P|, |Q| residual, p.u.
};

/// Newton-Raphson power flow in polar form. The reference bus is the slack,
/// other buses with machines are PV at their first machine's setpoint. Slack
/// active power goes to the first machine at the reference bus; reactive output
/// at each PV/slack bus is split evenly over its machines. Reactive limits are
/// not enforced. Throws Diverged / SingularJacobian.
PowerFlowResult newton_pf(const NetworkModel& net, const Demand& demand, const Dispatch& dispatch,
                          const PowerFlowOptions& options = {});

enum class AcOpfStatus { Optimal, Infeasible, MaxIterations, NumericalFailure };
std::string_view to_string(AcOpfStatus status);

struct AcOpfOptions {
  double tol = 1e-6;
  int max_iter = 200;
  /// Objective scaling inside the interior-point iteration.
  double cost_scale = 1e-4;
  /// Starting point; flat voltages and midpoint dispatch when empty.
  std::optional<AcState> initial;
};

struct AcOpfSolution {
  AcState state;
  double objective = 0.0;  // $/h, sum of c2 p^2 + c1 p + c0
  std::vector<Complex> sf;  // S_jk, p.u.
  std::vector<Complex> st;  // S_kj, p.u.
  AcOpfStatus status = AcOpfStatus::NumericalFailure;
  int iterations = 0;
  double kkt_residual = 0.0;  // max of the scaled feasibility/stationarity/complementarity measures
};

/// Primal-dual interior-point AC-OPF in polar coordinates. Never throws for
/// solver outcomes; inspect `status`.
AcOpfSolution solve_acopf(const NetworkModel& net, const Demand& demand, const AcOpfOptions& options = {});

enum class ConstraintKind {
  ActiveBalance,
  ReactiveBalance,
  ReferenceAngle,
  VoltageUpper,
  VoltageLower,
  ActiveUpper,
  ActiveLower,
  ReactiveUpper,
  ReactiveLower,
  ThermalFrom,
  ThermalTo,
  AngleDiffUpper,
  AngleDiffLower,
};
std::string_view to_string(ConstraintKind kind);

struct ConstraintSlack {
  ConstraintKind kind;
  std::size_t index;  // bus, machine or branch index
  double slack;       // >= 0 when satisfied; equalities report -|residual|
};

struct ViolationReport {
  double tol = 0.0;
  std::vector<ConstraintSlack> constraints;

  std::vector<ConstraintSlack> violations() const;
  bool feasible() const { return violations().empty(); }
};

ViolationReport check_feasibility(const NetworkModel& net, const Demand& demand, const AcState& state, double tol);

/// Converged operating point at nominal load for hot-start parameters: AC-OPF
/// dispatch polished by a power flow to `tol`. Falls back to case-file
/// setpoints when the OPF does not reach optimality.
AcState nominal_state(const NetworkModel& net, double tol = 1e-10);

}  // namespace dcopt
