#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "dcopt/acsolve.hpp"
#include "dcopt/error.hpp"
#include "injections.hpp"

namespace dcopt {
namespace {

using SpMat = Eigen::SparseMatrix<double>;

constexpr double kXi = 0.99995;      // fraction to the boundary
constexpr double kSigma = 0.1;       // centering parameter
constexpr double kAlphaMin = 1e-8;   // smallest acceptable step
constexpr double kInfeasibleFeascond = 1e-3;

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Linear constraint row sum(coef_j x_j) - rhs.
struct LinearRow {
  std::vector<std::pair<int, double>> coef;
  double rhs = 0.0;
};

class AcOpfProblem {
 public:
  AcOpfProblem(const NetworkModel& net, const Demand& demand, double cost_scale)
      : net_(net), demand_(demand), eval_(net), cost_scale_(cost_scale) {
    n_ = static_cast<int>(net.num_buses());
    ng_ = static_cast<int>(net.num_generators());
    nx_ = 2 * n_ + 2 * ng_;

    fixed_.push_back({{{static_cast<int>(net.reference), 1.0}}, 0.0});
    auto add_bounds = [&](int col, double lo, double hi) {
      if (lo == hi) {
        fixed_.push_back({{{col, 1.0}}, lo});
        return;
      }
      if (std::isfinite(hi)) bounds_.push_back({{{col, 1.0}}, hi});
      if (std::isfinite(lo)) bounds_.push_back({{{col, -1.0}}, -lo});
    };
    for (int i = 0; i < n_; ++i) add_bounds(n_ + i, net.buses[i].vmin, net.buses[i].vmax);
    for (int g = 0; g < ng_; ++g) add_bounds(2 * n_ + g, net.generators[g].pmin, net.generators[g].pmax);
    for (int g = 0; g < ng_; ++g) add_bounds(2 * n_ + ng_ + g, net.generators[g].qmin, net.generators[g].qmax);
    for (std::size_t e = 0; e < net.num_branches(); ++e) {
      const auto& br = net.branches[e];
      const int f = static_cast<int>(br.from), t = static_cast<int>(br.to);
      if (std::isfinite(br.angmax)) bounds_.push_back({{{f, 1.0}, {t, -1.0}}, br.angmax});
      if (std::isfinite(br.angmin)) bounds_.push_back({{{f, -1.0}, {t, 1.0}}, -br.angmin});
    }
    neq_ = 2 * n_ + static_cast<int>(fixed_.size());
    nth_ = 2 * static_cast<int>(net.num_branches());
    niq_ = nth_ + static_cast<int>(bounds_.size());
  }

  int nx() const { return nx_; }
  int neq() const { return neq_; }
  int niq() const { return niq_; }

  Vector initial_point(const std::optional<AcState>& init) const {
    Vector x(nx_);
    for (int i = 0; i < n_; ++i) {
      const auto& bus = net_.buses[i];
      x[i] = 0.0;
      x[n_ + i] = (1.0 > bus.vmin && 1.0 < bus.vmax) ? 1.0 : 0.5 * (bus.vmin + bus.vmax);
    }
    auto mid = [](double lo, double hi) {
      if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
      if (std::isfinite(lo)) return std::max(lo, 0.0);
      if (std::isfinite(hi)) return std::min(hi, 0.0);
      return 0.0;
    };
    for (int g = 0; g < ng_; ++g) {
      const auto& gen = net_.generators[g];
      x[2 * n_ + g] = mid(gen.pmin, gen.pmax);
      x[2 * n_ + ng_ + g] = mid(gen.qmin, gen.qmax);
    }
    if (init) {
      if (init->vm.size() != n_ || init->va.size() != n_ || init->pg.size() != ng_ || init->qg.size() != ng_)
        throw Error(Errc::DimensionMismatch, "AC-OPF initial point does not match the network");
      x << init->va, init->vm, init->pg, init->qg;
    }
    return x;
  }

  double cost(const Vector& x) const {
    double c = 0.0;
    for (int g = 0; g < ng_; ++g) {
      const auto& gen = net_.generators[g];
      const double p = x[2 * n_ + g];
      c += gen.c2 * p * p + gen.c1 * p + gen.c0;
    }
    return c;
  }

  struct Eval {
    double f = 0.0;
    Vector df;
    Vector g;
    SpMat jg;  // neq x nx
    Vector h;
    SpMat jh;  // niq x nx
    std::vector<EndFlow> from, to;
  };

  Eval evaluate(const Vector& x) const {
    Eval ev;
    const Vector va = x.head(n_);
    const Vector vm = x.segment(n_, n_);
    ev.f = cost_scale_ * cost(x);
    ev.df = Vector::Zero(nx_);
    for (int g = 0; g < ng_; ++g) {
      const auto& gen = net_.generators[g];
      ev.df[2 * n_ + g] = cost_scale_ * (2.0 * gen.c2 * x[2 * n_ + g] + gen.c1);
    }

    // Equalities.
    auto inj = eval_.injections(vm, va, true);
    ev.g = Vector(neq_);
    detail::Triplets tg = std::move(inj.jacobian);
    for (int i = 0; i < n_; ++i) {
      ev.g[i] = inj.p[i] + demand_.pd[i];
      ev.g[n_ + i] = inj.q[i] + demand_.qd[i];
    }
    for (int g = 0; g < ng_; ++g) {
      const int bus = static_cast<int>(net_.generators[g].bus);
      ev.g[bus] -= x[2 * n_ + g];
      ev.g[n_ + bus] -= x[2 * n_ + ng_ + g];
      tg.emplace_back(bus, 2 * n_ + g, -1.0);
      tg.emplace_back(n_ + bus, 2 * n_ + ng_ + g, -1.0);
    }
    for (std::size_t k = 0; k < fixed_.size(); ++k) {
      const int row = 2 * n_ + static_cast<int>(k);
      double v = -fixed_[k].rhs;
      for (auto [col, a] : fixed_[k].coef) {
        v += a * x[col];
        tg.emplace_back(row, col, a);
      }
      ev.g[row] = v;
    }
    ev.jg = SpMat(neq_, nx_);
    ev.jg.setFromTriplets(tg.begin(), tg.end());

    // Inequalities: squared thermal limits at both ends, then linear rows.
    ev.h = Vector(niq_);
    detail::Triplets th;
    th.reserve(16 * net_.num_branches() + 2 * bounds_.size());
    const auto nb = net_.num_branches();
    ev.from.reserve(nb);
    ev.to.reserve(nb);
    auto add_thermal = [&](int row, const EndFlow& fl, std::size_t i, std::size_t k, double rating) {
      ev.h[row] = fl.p * fl.p + fl.q * fl.q - rating * rating;
      for (int c = 0; c < 4; ++c)
        th.emplace_back(row, detail::NetworkEvaluator::column(c, i, k, static_cast<std::size_t>(n_)),
                        2.0 * (fl.p * fl.dp[c] + fl.q * fl.dq[c]));
    };
    for (std::size_t e = 0; e < nb; ++e) {
      const auto& br = net_.branches[e];
      ev.from.push_back(eval_.from_flow(e, vm, va, true));
      ev.to.push_back(eval_.to_flow(e, vm, va, true));
      add_thermal(static_cast<int>(e), ev.from.back(), br.from, br.to, br.rating);
      add_thermal(static_cast<int>(nb + e), ev.to.back(), br.to, br.from, br.rating);
    }
    for (std::size_t k = 0; k < bounds_.size(); ++k) {
      const int row = nth_ + static_cast<int>(k);
      double v = -bounds_[k].rhs;
      for (auto [col, a] : bounds_[k].coef) {
        v += a * x[col];
        th.emplace_back(row, col, a);
      }
      ev.h[row] = v;
    }
    ev.jh = SpMat(niq_, nx_);
    ev.jh.setFromTriplets(th.begin(), th.end());
    return ev;
  }

  /// Hessian of the Lagrangian.
  SpMat hessian(const Vector& x, const Eval& ev, const Vector& lam, const Vector& mu) const {
    const Vector va = x.head(n_);
    const Vector vm = x.segment(n_, n_);
    detail::Triplets t;
    for (int g = 0; g < ng_; ++g)
      t.emplace_back(2 * n_ + g, 2 * n_ + g, cost_scale_ * 2.0 * net_.generators[g].c2);
    eval_.add_hessian(vm, va, lam.head(n_), lam.segment(n_, n_), t);

    const auto nb = net_.num_branches();
    auto add_thermal = [&](double m, const EndFlow& fl, std::size_t i, std::size_t k) {
      if (m == 0.0) return;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
          const double v = 2.0 * m *
                           (fl.dp[r] * fl.dp[c] + fl.p * fl.hp[r][c] + fl.dq[r] * fl.dq[c] + fl.q * fl.hq[r][c]);
          t.emplace_back(detail::NetworkEvaluator::column(r, i, k, static_cast<std::size_t>(n_)),
                         detail::NetworkEvaluator::column(c, i, k, static_cast<std::size_t>(n_)), v);
        }
    };
    for (std::size_t e = 0; e < nb; ++e) {
      const auto& br = net_.branches[e];
      add_thermal(mu[static_cast<Eigen::Index>(e)], ev.from[e], br.from, br.to);
      add_thermal(mu[static_cast<Eigen::Index>(nb + e)], ev.to[e], br.to, br.from);
    }
    SpMat hess(nx_, nx_);
    hess.setFromTriplets(t.begin(), t.end());
    return hess;
  }

  AcState state(const Vector& x) const {
    return AcState{x.segment(n_, n_), x.head(n_), x.segment(2 * n_, ng_), x.segment(2 * n_ + ng_, ng_)};
  }

 private:
  const NetworkModel& net_;
  const Demand& demand_;
  detail::NetworkEvaluator eval_;
  double cost_scale_;
  int n_ = 0, ng_ = 0, nx_ = 0, neq_ = 0, nth_ = 0, niq_ = 0;
  std::vector<LinearRow> fixed_;
  std::vector<LinearRow> bounds_;
};

}  // namespace

std::string_view to_string(AcOpfStatus status) {
  switch (status) {
    case AcOpfStatus::Optimal: return "optimal";
    case AcOpfStatus::Infeasible: return "infeasible";
    case AcOpfStatus::MaxIterations: return "max_iterations";
    case AcOpfStatus::NumericalFailure: return "numerical_failure";
  }
  return "numerical_failure";
}

AcOpfSolution solve_acopf(const NetworkModel& net, const Demand& demand, const AcOpfOptions& options) {
  const auto nn = static_cast<Eigen::Index>(net.num_buses());
  if (demand.pd.size() != nn || demand.qd.size() != nn)
    throw Error(Errc::DimensionMismatch, "demand does not match the network");
  if (!demand.pd.allFinite() || !demand.qd.allFinite())
    throw Error(Errc::DimensionMismatch, "demand must be finite");

  const AcOpfProblem prob(net, demand, options.cost_scale);
  const int nx = prob.nx(), neq = prob.neq(), niq = prob.niq();

  Vector x = prob.initial_point(options.initial);
  auto ev = prob.evaluate(x);
  Vector lam = Vector::Zero(neq);
  Vector z = Vector::Ones(niq);
  Vector mu = Vector::Ones(niq);
  double gamma = 1.0;
  for (int k = 0; k < niq; ++k) {
    if (ev.h[k] < -1.0) z[k] = -ev.h[k];
    if (gamma / z[k] > 1.0) mu[k] = gamma / z[k];
  }

  AcOpfSolution sol;
  sol.status = AcOpfStatus::MaxIterations;
  double f0 = ev.f;
  double feascond = 0.0;
  Eigen::SparseLU<SpMat> lu;
  bool pattern_ready = false;

  for (int it = 0;; ++it) {
    const Vector lx = ev.df + ev.jg.transpose() * lam + ev.jh.transpose() * mu;
    const double maxh = niq ? ev.h.maxCoeff() : -std::numeric_limits<double>::infinity();
    const double xnorm = inf_norm(x);
    feascond = std::max(inf_norm(ev.g), maxh) / (1.0 + std::max(xnorm, inf_norm(z)));
    const double gradcond = inf_norm(lx) / (1.0 + std::max(inf_norm(lam), inf_norm(mu)));
    const double compcond = (niq ? z.dot(mu) : 0.0) / (1.0 + xnorm);
    const double costcond = std::abs(ev.f - f0) / (1.0 + std::abs(f0));
    sol.iterations = it;
    sol.kkt_residual = std::max({feascond, gradcond, compcond});
    if (feascond < options.tol && gradcond < options.tol && compcond < options.tol && costcond < options.tol) {
      sol.status = AcOpfStatus::Optimal;
      break;
    }
    if (it >= options.max_iter) {
      sol.status = feascond > kInfeasibleFeascond ? AcOpfStatus::Infeasible : AcOpfStatus::MaxIterations;
      break;
    }

    // Newton step on the reduced primal-dual system.
    const SpMat lxx = prob.hessian(x, ev, lam, mu);
    const Vector zinv = z.cwiseInverse();
    const Vector w = mu.cwiseProduct(zinv);
    const SpMat jht_w = ev.jh.transpose() * w.asDiagonal();
    const SpMat m = lxx + SpMat(jht_w * ev.jh);
    const Vector nvec = lx + ev.jh.transpose() * (zinv.cwiseProduct(mu.cwiseProduct(ev.h) + Vector::Constant(niq, gamma)));

    detail::Triplets t;
    t.reserve(static_cast<std::size_t>(m.nonZeros() + 2 * ev.jg.nonZeros()));
    for (int c = 0; c < m.outerSize(); ++c)
      for (SpMat::InnerIterator itm(m, c); itm; ++itm) t.emplace_back(itm.row(), itm.col(), itm.value());
    for (int c = 0; c < ev.jg.outerSize(); ++c)
      for (SpMat::InnerIterator itg(ev.jg, c); itg; ++itg) {
        t.emplace_back(nx + itg.row(), itg.col(), itg.value());
        t.emplace_back(itg.col(), nx + itg.row(), itg.value());
      }
    // Keep the full diagonal in the pattern so the symbolic analysis can be reused.
    for (int k = 0; k < nx + neq; ++k) t.emplace_back(k, k, 0.0);
    SpMat kkt(nx + neq, nx + neq);
    kkt.setFromTriplets(t.begin(), t.end());
    if (!pattern_ready) {
      lu.analyzePattern(kkt);
      pattern_ready = true;
    }
    lu.factorize(kkt);
    if (lu.info() != Eigen::Success) {
      sol.status = AcOpfStatus::NumericalFailure;
      break;
    }
    Vector rhs(nx + neq);
    rhs << -nvec, -ev.g;
    const Vector d = lu.solve(rhs);
    if (!d.allFinite()) {
      sol.status = AcOpfStatus::NumericalFailure;
      break;
    }
    const Vector dx = d.head(nx);
    const Vector dlam = d.tail(neq);
    const Vector dz = -ev.h - z - ev.jh * dx;
    const Vector dmu = -mu + zinv.cwiseProduct(Vector::Constant(niq, gamma) - mu.cwiseProduct(dz));

    double alpha_p = 1.0, alpha_d = 1.0;
    for (int k = 0; k < niq; ++k) {
      if (dz[k] < 0.0) alpha_p = std::min(alpha_p, kXi * (-z[k] / dz[k]));
      if (dmu[k] < 0.0) alpha_d = std::min(alpha_d, kXi * (-mu[k] / dmu[k]));
    }
    x += alpha_p * dx;
    z += alpha_p * dz;
    lam += alpha_d * dlam;
    mu += alpha_d * dmu;
    gamma = niq ? kSigma * z.dot(mu) / niq : 0.0;

    f0 = ev.f;
    ev = prob.evaluate(x);
    if (!x.allFinite() || !std::isfinite(ev.f) || alpha_p < kAlphaMin || alpha_d < kAlphaMin ||
        (niq && (gamma < std::numeric_limits<double>::epsilon() || gamma > 1.0 / std::numeric_limits<double>::epsilon()))) {
      sol.iterations = it + 1;
      sol.status = AcOpfStatus::NumericalFailure;
      break;
    }
  }

  sol.state = prob.state(x);
  sol.state.va.array() -= sol.state.va[static_cast<Eigen::Index>(net.reference)];
  sol.objective = prob.cost(x);
  const auto flows = branch_flows(net, sol.state.vm, sol.state.va);
  sol.sf = flows.from;
  sol.st = flows.to;
  return sol;
}

}  // namespace dcopt
