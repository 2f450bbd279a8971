#include "dcopt/acflow.hpp"

#include <algorithm>
#include <cmath>

namespace dcopt {

EndFlow end_flow(Complex y_self, Complex y_mutual, double v_i, double v_k, double theta_i,
                 double theta_k, bool with_hessian) {
  const double gs = y_self.real();
  const double bs = y_self.imag();
  const double gm = y_mutual.real();
  const double bm = y_mutual.imag();
  const double delta = theta_i - theta_k;
  const double c = std::cos(delta);
  const double s = std::sin(delta);
  const double a = gm * c + bm * s;  // dA/d(delta) = -B
  const double b = gm * s - bm * c;  // dB/d(delta) = A
  const double vv = v_i * v_k;

  EndFlow f;
  f.p = gs * v_i * v_i + vv * a;
  f.q = -bs * v_i * v_i + vv * b;
  f.dp = {-vv * b, vv * b, 2.0 * gs * v_i + v_k * a, v_i * a};
  f.dq = {vv * a, -vv * a, -2.0 * bs * v_i + v_k * b, v_i * b};
  if (!with_hessian) return f;

  auto& hp = f.hp;
  hp[0][0] = -vv * a;
  hp[0][1] = vv * a;
  hp[1][1] = -vv * a;
  hp[0][2] = -v_k * b;
  hp[0][3] = -v_i * b;
  hp[1][2] = v_k * b;
  hp[1][3] = v_i * b;
  hp[2][2] = 2.0 * gs;
  hp[2][3] = a;
  hp[3][3] = 0.0;

  auto& hq = f.hq;
  hq[0][0] = -vv * b;
  hq[0][1] = vv * b;
  hq[1][1] = -vv * b;
  hq[0][2] = v_k * a;
  hq[0][3] = v_i * a;
  hq[1][2] = -v_k * a;
  hq[1][3] = -v_i * a;
  hq[2][2] = -2.0 * bs;
  hq[2][3] = b;
  hq[3][3] = 0.0;

  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < r; ++col) {
      hp[r][col] = hp[col][r];
      hq[r][col] = hq[col][r];
    }
  }
  return f;
}

BranchFlows branch_flows(const NetworkModel& net, const Vector& vm, const Vector& va) {
  BranchFlows out;
  out.from.reserve(net.num_branches());
  out.to.reserve(net.num_branches());
  for (const auto& br : net.branches) {
    const TwoPort y = two_port(br);
    const auto f = end_flow(y.yff, y.yft, vm[br.from], vm[br.to], va[br.from], va[br.to]);
    const auto t = end_flow(y.ytt, y.ytf, vm[br.to], vm[br.from], va[br.to], va[br.from]);
    out.from.emplace_back(f.p, f.q);
    out.to.emplace_back(t.p, t.q);
  }
  return out;
}

double Mismatch::max_abs() const {
  double m = 0.0;
  if (p.size() > 0) m = std::max(m, p.cwiseAbs().maxCoeff());
  if (q.size() > 0) m = std::max(m, q.cwiseAbs().maxCoeff());
  return m;
}

Mismatch bus_mismatch(const NetworkModel& net, const AcState& state, const Demand& demand) {
  const std::size_t n = net.num_buses();
  Mismatch mis{demand.pd, demand.qd};
  for (std::size_t i = 0; i < n; ++i) {
    const double v2 = state.vm[i] * state.vm[i];
    mis.p[i] += net.buses[i].gs * v2;
    mis.q[i] -= net.buses[i].bs * v2;
  }
  const auto flows = branch_flows(net, state.vm, state.va);
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const auto& br = net.branches[e];
    mis.p[br.from] += flows.from[e].real();
    mis.q[br.from] += flows.from[e].imag();
    mis.p[br.to] += flows.to[e].real();
    mis.q[br.to] += flows.to[e].imag();
  }
  for (std::size_t g = 0; g < net.num_generators(); ++g) {
    const auto bus = net.generators[g].bus;
    mis.p[bus] -= state.pg[g];
    mis.q[bus] -= state.qg[g];
  }
  return mis;
}

}  // namespace dcopt
