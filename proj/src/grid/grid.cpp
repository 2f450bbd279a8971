#include "dcopt/grid.hpp"

#include <cmath>
#include <queue>
#include <string>

#include "dcopt/acflow.hpp"
#include "dcopt/error.hpp"

namespace dcopt {

Vector NetworkModel::nominal_pd() const {
  Vector pd(buses.size());
  for (std::size_t i = 0; i < buses.size(); ++i) pd[i] = buses[i].pd;
  return pd;
}

Vector NetworkModel::nominal_qd() const {
  Vector qd(buses.size());
  for (std::size_t i = 0; i < buses.size(); ++i) qd[i] = buses[i].qd;
  return qd;
}

std::vector<std::vector<std::size_t>> NetworkModel::generators_at_bus() const {
  std::vector<std::vector<std::size_t>> at(buses.size());
  for (std::size_t g = 0; g < generators.size(); ++g) at[generators[g].bus].push_back(g);
  return at;
}

void validate(const NetworkModel& net) {
  const std::size_t n = net.num_buses();
  if (n == 0) throw Error(Errc::InvalidCase, "network has no buses");
  std::size_t refs = 0;
  for (const auto& bus : net.buses) {
    if (bus.is_reference) ++refs;
    if (bus.vmin > bus.vmax)
      throw Error(Errc::InvalidCase, "bus " + std::to_string(bus.id) + " has vmin > vmax");
  }
  if (refs != 1 || net.reference >= n || !net.buses[net.reference].is_reference)
    throw Error(Errc::NoReferenceBus, "expected exactly one reference bus, found " + std::to_string(refs));
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const auto& br = net.branches[e];
    if (br.from >= n || br.to >= n)
      throw Error(Errc::UnknownBus, "branch " + std::to_string(e) + " references a missing bus");
    if (br.x == 0.0)
      throw Error(Errc::ZeroImpedance, "branch " + std::to_string(e) + " has zero reactance");
  }
  for (std::size_t g = 0; g < net.num_generators(); ++g) {
    const auto& gen = net.generators[g];
    if (gen.bus >= n) throw Error(Errc::UnknownBus, "generator " + std::to_string(g) + " references a missing bus");
    if (gen.pmin > gen.pmax)
      throw Error(Errc::InvalidCase, "generator " + std::to_string(g) + " has pmin > pmax");
  }

  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& br : net.branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> todo;
  todo.push(net.reference);
  seen[net.reference] = true;
  std::size_t reached = 1;
  while (!todo.empty()) {
    const auto i = todo.front();
    todo.pop();
    for (auto k : adj[i]) {
      if (!seen[k]) {
        seen[k] = true;
        ++reached;
        todo.push(k);
      }
    }
  }
  if (reached != n)
    throw Error(Errc::IslandedNetwork,
                std::to_string(n - reached) + " bus(es) unreachable from the reference bus");
}

Vector DcParams::flatten() const {
  Vector x(size());
  x << b, gamma, rho;
  return x;
}

DcParams DcParams::unflatten(const Vector& x, std::size_t num_branches, std::size_t num_buses) {
  const auto ne = static_cast<Eigen::Index>(num_branches);
  const auto nn = static_cast<Eigen::Index>(num_buses);
  if (x.size() != 2 * ne + nn)
    throw Error(Errc::DimensionMismatch, "parameter vector has length " + std::to_string(x.size()));
  return DcParams{x.head(ne), x.segment(ne, nn), x.tail(ne)};
}

void check_dimensions(const NetworkModel& net, const DcParams& params) {
  if (static_cast<std::size_t>(params.b.size()) != net.num_branches() ||
      static_cast<std::size_t>(params.rho.size()) != net.num_branches() ||
      static_cast<std::size_t>(params.gamma.size()) != net.num_buses())
    throw Error(Errc::DimensionMismatch, "parameter dimensions do not match network " + net.name);
  if (!params.flatten().allFinite()) throw Error(Errc::DimensionMismatch, "parameters must be finite");
}

SparseMatrix incidence(const NetworkModel& net) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * net.num_branches());
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const auto row = static_cast<int>(e);
    t.emplace_back(row, static_cast<int>(net.branches[e].from), 1.0);
    t.emplace_back(row, static_cast<int>(net.branches[e].to), -1.0);
  }
  SparseMatrix a(static_cast<Eigen::Index>(net.num_branches()), static_cast<Eigen::Index>(net.num_buses()));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

TwoPort two_port(const Branch& br) {
  if (br.r == 0.0 && br.x == 0.0) throw Error(Errc::ZeroImpedance, "branch has r = x = 0");
  const Complex ys = 1.0 / Complex(br.r, br.x);
  const Complex half_charging(0.0, br.charging / 2.0);
  const Complex tap = std::polar(br.tap, br.shift);
  const Complex ytt = ys + half_charging;
  return TwoPort{ytt / (tap * std::conj(tap)), -ys / std::conj(tap), -ys / tap, ytt};
}

std::vector<BranchAdmittance> branch_admittance(const NetworkModel& net) {
  std::vector<BranchAdmittance> out;
  out.reserve(net.num_branches());
  for (const auto& br : net.branches) {
    const TwoPort y = two_port(br);
    out.push_back({-y.yft, -y.ytf, y.yff + y.yft, y.ytt + y.ytf});
  }
  return out;
}

DcParams cold_start(const NetworkModel& net, ColdStartMode mode) {
  const auto ne = static_cast<Eigen::Index>(net.num_branches());
  DcParams p{Vector(ne), Vector::Zero(static_cast<Eigen::Index>(net.num_buses())), Vector::Zero(ne)};
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto& br = net.branches[static_cast<std::size_t>(e)];
    if (br.r == 0.0 && br.x == 0.0) throw Error(Errc::ZeroImpedance, "branch " + std::to_string(e));
    if (mode == ColdStartMode::InverseReactance || br.r == 0.0) {
      if (br.x == 0.0) throw Error(Errc::ZeroImpedance, "branch " + std::to_string(e) + " has x = 0");
      p.b[e] = 1.0 / br.x;
    } else {
      p.b[e] = br.x / (br.r * br.r + br.x * br.x);
    }
  }
  return p;
}

double sinc(double x) {
  if (std::abs(x) < 1e-6) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

DcParams hot_start(const NetworkModel& net, const AcState& nominal, const Demand& demand,
                   double mismatch_tol) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  if (nominal.vm.size() != n || nominal.va.size() != n ||
      static_cast<std::size_t>(nominal.pg.size()) != net.num_generators())
    throw Error(Errc::DimensionMismatch, "nominal state does not match the network");
  const double mis = bus_mismatch(net, nominal, demand).max_abs();
  if (!(mis <= mismatch_tol))
    throw Error(Errc::NominalNotConverged, "nominal state mismatch " + std::to_string(mis));

  DcParams p = cold_start(net);
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const auto& br = net.branches[e];
    const double vj = nominal.vm[br.from];
    const double vk = nominal.vm[br.to];
    const double dtheta = nominal.va[br.from] - nominal.va[br.to];
    const auto idx = static_cast<Eigen::Index>(e);
    p.b[idx] *= vj * vk * sinc(dtheta);
    const double g = br.r / (br.r * br.r + br.x * br.x);  // Re of the series admittance
    p.rho[idx] = g * vj * (vj - vk * std::cos(dtheta));
    p.gamma[static_cast<Eigen::Index>(br.from)] += p.rho[idx];
  }
  return p;
}

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::MissingTable: return "MissingTable";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::DuplicateBusId: return "DuplicateBusId";
    case Errc::UnknownBus: return "UnknownBus";
    case Errc::InvalidCase: return "InvalidCase";
    case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::CrossReferenceError: return "CrossReferenceError";
    case Errc::EmptyEvaluation: return "EmptyEvaluation";
    case Errc::UnsupportedCostModel: return "UnsupportedCostModel";
    case Errc::IslandedNetwork: return "IslandedNetwork";
    case Errc::NoReferenceBus: return "NoReferenceBus";
    case Errc::ZeroImpedance: return "ZeroImpedance";
    case Errc::NominalNotConverged: return "NominalNotConverged";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::Diverged: return "Diverged";
    case Errc::SingularJacobian: return "SingularJacobian";
    case Errc::PrimalInfeasible: return "PrimalInfeasible";
    case Errc::Unbounded: return "Unbounded";
    case Errc::MaxIterations: return "MaxIterations";
    case Errc::SingularKkt: return "SingularKkt";
    case Errc::NotOptimal: return "NotOptimal";
    case Errc::LowerLevelInfeasible: return "LowerLevelInfeasible";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace dcopt
