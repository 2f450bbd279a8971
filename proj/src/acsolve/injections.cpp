#include "injections.hpp"

namespace dcopt::detail {

NetworkEvaluator::NetworkEvaluator(const NetworkModel& net) : net_(net) {
  y_.reserve(net.num_branches());
  for (const auto& br : net.branches) y_.push_back(two_port(br));
}

EndFlow NetworkEvaluator::from_flow(std::size_t e, const Vector& vm, const Vector& va, bool with_hessian) const {
  const auto& br = net_.branches[e];
  return end_flow(y_[e].yff, y_[e].yft, vm[br.from], vm[br.to], va[br.from], va[br.to], with_hessian);
}

EndFlow NetworkEvaluator::to_flow(std::size_t e, const Vector& vm, const Vector& va, bool with_hessian) const {
  const auto& br = net_.branches[e];
  return end_flow(y_[e].ytt, y_[e].ytf, vm[br.to], vm[br.from], va[br.to], va[br.from], with_hessian);
}

Injections NetworkEvaluator::injections(const Vector& vm, const Vector& va, bool with_jacobian) const {
  const std::size_t n = net_.num_buses();
  Injections out{Vector::Zero(static_cast<Eigen::Index>(n)), Vector::Zero(static_cast<Eigen::Index>(n)), {}};
  if (with_jacobian) out.jacobian.reserve(16 * net_.num_branches() + 2 * n);

  auto add_end = [&](const EndFlow& f, std::size_t i, std::size_t k) {
    out.p[static_cast<Eigen::Index>(i)] += f.p;
    out.q[static_cast<Eigen::Index>(i)] += f.q;
    if (!with_jacobian) return;
    for (int c = 0; c < 4; ++c) {
      const int col = column(c, i, k, n);
      out.jacobian.emplace_back(static_cast<int>(i), col, f.dp[c]);
      out.jacobian.emplace_back(static_cast<int>(n + i), col, f.dq[c]);
    }
  };
  for (std::size_t e = 0; e < net_.num_branches(); ++e) {
    const auto& br = net_.branches[e];
    add_end(from_flow(e, vm, va, false), br.from, br.to);
    add_end(to_flow(e, vm, va, false), br.to, br.from);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double v = vm[ii];
    out.p[ii] += net_.buses[i].gs * v * v;
    out.q[ii] -= net_.buses[i].bs * v * v;
    if (with_jacobian) {
      out.jacobian.emplace_back(static_cast<int>(i), static_cast<int>(n + i), 2.0 * net_.buses[i].gs * v);
      out.jacobian.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), -2.0 * net_.buses[i].bs * v);
    }
  }
  return out;
}

void NetworkEvaluator::add_hessian(const Vector& vm, const Vector& va, const Vector& lam_p, const Vector& lam_q,
                                   Triplets& out) const {
  const std::size_t n = net_.num_buses();
  auto add_end = [&](const EndFlow& f, std::size_t i, std::size_t k) {
    const double lp = lam_p[static_cast<Eigen::Index>(i)];
    const double lq = lam_q[static_cast<Eigen::Index>(i)];
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        const double v = lp * f.hp[r][c] + lq * f.hq[r][c];
        if (v != 0.0) out.emplace_back(column(r, i, k, n), column(c, i, k, n), v);
      }
  };
  for (std::size_t e = 0; e < net_.num_branches(); ++e) {
    const auto& br = net_.branches[e];
    add_end(from_flow(e, vm, va, true), br.from, br.to);
    add_end(to_flow(e, vm, va, true), br.to, br.from);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double v = 2.0 * (lam_p[ii] * net_.buses[i].gs - lam_q[ii] * net_.buses[i].bs);
    if (v != 0.0) out.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), v);
  }
}

}  // namespace dcopt::detail
