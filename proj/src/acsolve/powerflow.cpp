#include <Eigen/SparseLU>
#include <cmath>

#include "dcopt/acsolve.hpp"
#include "dcopt/error.hpp"
#include "injections.hpp"

namespace dcopt {

Dispatch case_dispatch(const NetworkModel& net) {
  const auto ng = static_cast<Eigen::Index>(net.num_generators());
  Dispatch d{Vector(ng), Vector(ng)};
  for (Eigen::Index g = 0; g < ng; ++g) {
    d.pg[g] = net.generators[static_cast<std::size_t>(g)].pg0;
    d.vset[g] = net.generators[static_cast<std::size_t>(g)].vg;
  }
  return d;
}

PowerFlowResult newton_pf(const NetworkModel& net, const Demand& demand, const Dispatch& dispatch,
                          const PowerFlowOptions& options) {
  const std::size_t n = net.num_buses();
  const auto nn = static_cast<Eigen::Index>(n);
  if (demand.pd.size() != nn || demand.qd.size() != nn ||
      static_cast<std::size_t>(dispatch.pg.size()) != net.num_generators() ||
      dispatch.vset.size() != dispatch.pg.size())
    throw Error(Errc::DimensionMismatch, "power flow inputs do not match the network");

  const auto at_bus = net.generators_at_bus();
  Vector vm(nn), va = Vector::Zero(nn);
  Vector pg_bus = Vector::Zero(nn);
  std::vector<int> ang_idx(n, -1), mag_idx(n, -1);
  int nvar = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != net.reference) ang_idx[i] = nvar++;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (auto g : at_bus[i]) pg_bus[ii] += dispatch.pg[static_cast<Eigen::Index>(g)];
    if (!at_bus[i].empty()) {
      vm[ii] = dispatch.vset[static_cast<Eigen::Index>(at_bus[i].front())];
    } else if (i == net.reference) {
      vm[ii] = net.buses[i].vm0;
    } else {
      vm[ii] = 1.0;
      mag_idx[i] = nvar++;
    }
  }
  if (options.initial) {
    if (options.initial->vm.size() != nn || options.initial->va.size() != nn)
      throw Error(Errc::DimensionMismatch, "initial power-flow state does not match the network");
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (ang_idx[i] >= 0) va[ii] = options.initial->va[ii];
      if (mag_idx[i] >= 0) vm[ii] = options.initial->vm[ii];
    }
  }

  const detail::NetworkEvaluator eval(net);
  // Row map: P rows for non-reference buses share the angle indices, Q rows
  // for PQ buses share the magnitude indices.
  auto residual = [&](const detail::Injections& inj) {
    Vector f(nvar);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (ang_idx[i] >= 0) f[ang_idx[i]] = inj.p[ii] + demand.pd[ii] - pg_bus[ii];
      if (mag_idx[i] >= 0) f[mag_idx[i]] = inj.q[ii] + demand.qd[ii];
    }
    return f;
  };
  auto map_index = [&](int idx) -> int {
    const auto i = static_cast<std::size_t>(idx) % n;
    return static_cast<std::size_t>(idx) < n ? ang_idx[i] : mag_idx[i];
  };

  PowerFlowResult result;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool pattern_ready = false;
  for (int it = 0;; ++it) {
    auto inj = eval.injections(vm, va, true);
    const Vector f = residual(inj);
    const double norm = nvar > 0 ? f.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(norm)) throw Error(Errc::Diverged, "power flow produced non-finite mismatch");
    if (norm <= options.tol) {
      result.iterations = it;
      break;
    }
    if (it >= options.max_iter)
      throw Error(Errc::Diverged, "power flow mismatch " + std::to_string(norm) + " after " +
                                      std::to_string(it) + " iterations");
    detail::Triplets t;
    t.reserve(inj.jacobian.size());
    for (const auto& e : inj.jacobian) {
      const int r = map_index(e.row());
      const int c = map_index(e.col());
      if (r >= 0 && c >= 0) t.emplace_back(r, c, e.value());
    }
    Eigen::SparseMatrix<double> jac(nvar, nvar);
    jac.setFromTriplets(t.begin(), t.end());
    if (!pattern_ready) {
      lu.analyzePattern(jac);
      pattern_ready = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success) throw Error(Errc::SingularJacobian, "power-flow Jacobian is singular");
    const Vector dx = lu.solve(-f);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (ang_idx[i] >= 0) va[ii] += dx[ang_idx[i]];
      if (mag_idx[i] >= 0) vm[ii] += dx[mag_idx[i]];
    }
  }

  // Recover machine outputs.
  const auto inj = eval.injections(vm, va, false);
  AcState& s = result.state;
  s.vm = vm;
  s.va = va;
  s.pg = dispatch.pg;
  s.qg = Vector::Zero(dispatch.pg.size());
  const auto ref = static_cast<Eigen::Index>(net.reference);
  if (!at_bus[net.reference].empty()) {
    const auto first = static_cast<Eigen::Index>(at_bus[net.reference].front());
    s.pg[first] += inj.p[ref] + demand.pd[ref] - pg_bus[ref];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (at_bus[i].empty()) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const double share = (inj.q[ii] + demand.qd[ii]) / static_cast<double>(at_bus[i].size());
    for (auto g : at_bus[i]) s.qg[static_cast<Eigen::Index>(g)] = share;
  }
  result.mismatch = bus_mismatch(net, s, demand).max_abs();
  return result;
}

}  // namespace dcopt
