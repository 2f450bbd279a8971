#pragma once

#include <array>
#include <vector>

#include "dcopt/grid.hpp"

namespace dcopt {

/// Complex power entering a branch at one end, with first and second
/// derivatives in the local variable order (theta_i, theta_k, v_i, v_k) where
/// i is this end and k the far end.
struct EndFlow {
  double p = 0.0;
  double q = 0.0;
  std::array<double, 4> dp{};
  std::array<double, 4> dq{};
  std::array<std::array<double, 4>, 4> hp{};
  std::array<std::array<double, 4>, 4> hq{};
};

/// P + jQ = conj(y_self) v_i^2 + conj(y_mutual) v_i v_k e^{j(theta_i - theta_k)}.
EndFlow end_flow(Complex y_self, Complex y_mutual, double v_i, double v_k, double theta_i,
                 double theta_k, bool with_hessian = false);

struct BranchFlows {
  std::vector<Complex> from;  // S_jk
  std::vector<Complex> to;    // S_kj
};

BranchFlows branch_flows(const NetworkModel& net, const Vector& vm, const Vector& va);

/// Net injection residual per bus: network flows + shunt + demand - generation.
/// Zero at a power-flow solution.
struct Mismatch {
  Vector p;
  Vector q;
  double max_abs() const;
};

Mismatch bus_mismatch(const NetworkModel& net, const AcState& state, const Demand& demand);

}  // namespace dcopt
