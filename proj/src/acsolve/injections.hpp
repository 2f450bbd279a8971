#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "dcopt/acflow.hpp"
#include "dcopt/grid.hpp"

namespace dcopt::detail {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Network side of the bus balance: power leaving each bus through branches
/// and shunts. Jacobian triplets use rows P_i -> i, Q_i -> n + i and columns
/// va_j -> j, vm_j -> n + j.
struct Injections {
  Vector p;
  Vector q;
  Triplets jacobian;
};

class NetworkEvaluator {
 public:
  explicit NetworkEvaluator(const NetworkModel& net);

  Injections injections(const Vector& vm, const Vector& va, bool with_jacobian) const;

  /// Adds sum_i lam_p[i] * hess(P_i) + lam_q[i] * hess(Q_i) over (va, vm),
  /// with va at column offset 0 and vm at offset n.
  void add_hessian(const Vector& vm, const Vector& va, const Vector& lam_p, const Vector& lam_q,
                   Triplets& out) const;

  EndFlow from_flow(std::size_t e, const Vector& vm, const Vector& va, bool with_hessian) const;
  EndFlow to_flow(std::size_t e, const Vector& vm, const Vector& va, bool with_hessian) const;

  /// Global column of local variable k (theta_i, theta_k, v_i, v_k) for an end i -> k.
  static int column(int k, std::size_t i, std::size_t far, std::size_t n) {
    switch (k) {
      case 0: return static_cast<int>(i);
      case 1: return static_cast<int>(far);
      case 2: return static_cast<int>(n + i);
      default: return static_cast<int>(n + far);
    }
  }

  const NetworkModel& net() const { return net_; }

 private:
  const NetworkModel& net_;
  std::vector<TwoPort> y_;
};

}  // namespace dcopt::detail
