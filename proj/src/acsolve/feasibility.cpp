#include <cmath>

#include "dcopt/acsolve.hpp"
#include "dcopt/error.hpp"

namespace dcopt {

std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::ActiveBalance: return "active_balance";
    case ConstraintKind::ReactiveBalance: return "reactive_balance";
    case ConstraintKind::ReferenceAngle: return "reference_angle";
    case ConstraintKind::VoltageUpper: return "voltage_upper";
    case ConstraintKind::VoltageLower: return "voltage_lower";
    case ConstraintKind::ActiveUpper: return "active_upper";
    case ConstraintKind::ActiveLower: return "active_lower";
    case ConstraintKind::ReactiveUpper: return "reactive_upper";
    case ConstraintKind::ReactiveLower: return "reactive_lower";
    case ConstraintKind::ThermalFrom: return "thermal_from";
    case ConstraintKind::ThermalTo: return "thermal_to";
    case ConstraintKind::AngleDiffUpper: return "angle_diff_upper";
    case ConstraintKind::AngleDiffLower: return "angle_diff_lower";
  }
  return "unknown";
}

std::vector<ConstraintSlack> ViolationReport::violations() const {
  std::vector<ConstraintSlack> out;
  for (const auto& c : constraints)
    if (!(c.slack >= -tol)) out.push_back(c);
  return out;
}

ViolationReport check_feasibility(const NetworkModel& net, const Demand& demand, const AcState& state, double tol) {
  const auto nn = static_cast<Eigen::Index>(net.num_buses());
  const auto ng = static_cast<Eigen::Index>(net.num_generators());
  if (state.vm.size() != nn || state.va.size() != nn || state.pg.size() != ng || state.qg.size() != ng)
    throw Error(Errc::DimensionMismatch, "AC state does not match the network");

  ViolationReport rep;
  rep.tol = tol;
  auto& out = rep.constraints;
  const auto mis = bus_mismatch(net, state, demand);
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.push_back({ConstraintKind::ActiveBalance, i, -std::abs(mis.p[ii])});
    out.push_back({ConstraintKind::ReactiveBalance, i, -std::abs(mis.q[ii])});
    out.push_back({ConstraintKind::VoltageUpper, i, net.buses[i].vmax - state.vm[ii]});
    out.push_back({ConstraintKind::VoltageLower, i, state.vm[ii] - net.buses[i].vmin});
  }
  out.push_back({ConstraintKind::ReferenceAngle, net.reference,
                 -std::abs(state.va[static_cast<Eigen::Index>(net.reference)])});
  for (std::size_t g = 0; g < net.num_generators(); ++g) {
    const auto gi = static_cast<Eigen::Index>(g);
    const auto& gen = net.generators[g];
    out.push_back({ConstraintKind::ActiveUpper, g, gen.pmax - state.pg[gi]});
    out.push_back({ConstraintKind::ActiveLower, g, state.pg[gi] - gen.pmin});
    if (std::isfinite(gen.qmax)) out.push_back({ConstraintKind::ReactiveUpper, g, gen.qmax - state.qg[gi]});
    if (std::isfinite(gen.qmin)) out.push_back({ConstraintKind::ReactiveLower, g, state.qg[gi] - gen.qmin});
  }
  const auto flows = branch_flows(net, state.vm, state.va);
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const auto& br = net.branches[e];
    out.push_back({ConstraintKind::ThermalFrom, e, br.rating - std::abs(flows.from[e])});
    out.push_back({ConstraintKind::ThermalTo, e, br.rating - std::abs(flows.to[e])});
    const double diff = state.va[static_cast<Eigen::Index>(br.from)] - state.va[static_cast<Eigen::Index>(br.to)];
    if (std::isfinite(br.angmax)) out.push_back({ConstraintKind::AngleDiffUpper, e, br.angmax - diff});
    if (std::isfinite(br.angmin)) out.push_back({ConstraintKind::AngleDiffLower, e, diff - br.angmin});
  }
  return rep;
}

AcState nominal_state(const NetworkModel& net, double tol) {
  const Demand demand{net.nominal_pd(), net.nominal_qd()};
  Dispatch dispatch = case_dispatch(net);
  PowerFlowOptions pf;
  pf.tol = tol;
  const auto opf = solve_acopf(net, demand);
  if (opf.status == AcOpfStatus::Optimal) {
    dispatch.pg = opf.state.pg;
    for (std::size_t g = 0; g < net.num_generators(); ++g)
      dispatch.vset[static_cast<Eigen::Index>(g)] = opf.state.vm[static_cast<Eigen::Index>(net.generators[g].bus)];
    pf.initial = opf.state;
  }
  return newton_pf(net, demand, dispatch, pf).state;
}

}  // namespace dcopt
