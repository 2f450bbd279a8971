#include <cmath>

#include "dcopt/dcsolve.hpp"
#include "dcopt/error.hpp"

namespace dcopt {

QpProblem build_qp(const NetworkModel& net, const DcParams& params, const Vector& pd) {
  check_dimensions(net, params);
  const std::size_t n = net.num_buses();
  const std::size_t ne = net.num_branches();
  const std::size_t ng = net.num_generators();
  if (static_cast<std::size_t>(pd.size()) != n)
    throw Error(Errc::DimensionMismatch, "demand vector has length " + std::to_string(pd.size()));

  QpProblem qp;
  auto& lay = qp.layout;
  lay.num_buses = n;
  lay.num_branches = ne;
  lay.num_generators = ng;
  for (std::size_t g = 0; g < ng; ++g)
    (net.generators[g].pmin == net.generators[g].pmax ? lay.fixed_generators : lay.bounded_generators).push_back(g);

  const auto nx = static_cast<Eigen::Index>(lay.num_vars());
  auto col = [](std::size_t v) { return static_cast<int>(v); };

  qp.hdiag = Vector::Zero(nx);
  qp.c = Vector::Zero(nx);
  qp.curvature_floor = Vector::Zero(nx);
  for (std::size_t g = 0; g < ng; ++g) {
    const auto& gen = net.generators[g];
    const auto v = static_cast<Eigen::Index>(lay.pg_var(g));
    qp.hdiag[v] = 2.0 * gen.c2;
    if (gen.c2 == 0.0) {
      qp.curvature_floor[v] = kCurvatureFloor;
      qp.hdiag[v] += kCurvatureFloor;
    }
    qp.c[v] = gen.c1;
    qp.c0 += gen.c0;
  }

  qp.bindings.incidence = incidence(net);
  for (const auto& br : net.branches) {
    qp.bindings.from.push_back(br.from);
    qp.bindings.to.push_back(br.to);
  }

  // Equalities: sum of machines at i - (A^T diag(b) A theta)_i = pd_i + gamma_i + (A^T rho)_i.
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(ng + 4 * ne + 1 + lay.fixed_generators.size());
  for (std::size_t g = 0; g < ng; ++g) t.emplace_back(col(lay.balance_row(net.generators[g].bus)), col(lay.pg_var(g)), 1.0);
  qp.b_eq = Vector::Zero(static_cast<Eigen::Index>(lay.num_eq()));
  qp.b_eq.head(static_cast<Eigen::Index>(n)) = pd + params.gamma;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& br = net.branches[e];
    const double b = params.b[static_cast<Eigen::Index>(e)];
    const int f = col(lay.theta_var(br.from)), to = col(lay.theta_var(br.to));
    t.emplace_back(col(br.from), f, -b);
    t.emplace_back(col(br.from), to, b);
    t.emplace_back(col(br.to), f, b);
    t.emplace_back(col(br.to), to, -b);
    const double rho = params.rho[static_cast<Eigen::Index>(e)];
    qp.b_eq[static_cast<Eigen::Index>(br.from)] += rho;
    qp.b_eq[static_cast<Eigen::Index>(br.to)] -= rho;
  }
  t.emplace_back(col(lay.reference_row()), col(lay.theta_var(net.reference)), 1.0);
  for (std::size_t k = 0; k < lay.fixed_generators.size(); ++k) {
    const auto g = lay.fixed_generators[k];
    const auto row = lay.reference_row() + 1 + k;
    t.emplace_back(col(row), col(lay.pg_var(g)), 1.0);
    qp.b_eq[static_cast<Eigen::Index>(row)] = net.generators[g].pmin;
  }
  qp.a_eq = SparseMatrix(static_cast<Eigen::Index>(lay.num_eq()), nx);
  qp.a_eq.setFromTriplets(t.begin(), t.end());

  // Inequalities: +/-(b_e (theta_f - theta_t)) <= rating -/+ rho_e, then dispatch bounds.
  t.clear();
  qp.h = Vector(static_cast<Eigen::Index>(lay.num_ineq()));
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& br = net.branches[e];
    const auto ei = static_cast<Eigen::Index>(e);
    const double b = params.b[ei];
    const int f = col(lay.theta_var(br.from)), to = col(lay.theta_var(br.to));
    const int up = col(lay.flow_upper_row(e)), lo = col(lay.flow_lower_row(e));
    t.emplace_back(up, f, b);
    t.emplace_back(up, to, -b);
    t.emplace_back(lo, f, -b);
    t.emplace_back(lo, to, b);
    qp.h[up] = br.rating - params.rho[ei];
    qp.h[lo] = br.rating + params.rho[ei];
  }
  for (std::size_t k = 0; k < lay.bounded_generators.size(); ++k) {
    const auto g = lay.bounded_generators[k];
    const int up = col(lay.box_upper_row(k)), lo = col(lay.box_lower_row(k));
    t.emplace_back(up, col(lay.pg_var(g)), 1.0);
    t.emplace_back(lo, col(lay.pg_var(g)), -1.0);
    qp.h[up] = net.generators[g].pmax;
    qp.h[lo] = -net.generators[g].pmin;
  }
  qp.g = SparseMatrix(static_cast<Eigen::Index>(lay.num_ineq()), nx);
  qp.g.setFromTriplets(t.begin(), t.end());
  return qp;
}

double dispatch_cost(const NetworkModel& net, const Vector& pg) {
  double c = 0.0;
  for (std::size_t g = 0; g < net.num_generators(); ++g) {
    const auto& gen = net.generators[g];
    const double p = pg[static_cast<Eigen::Index>(g)];
    c += gen.c2 * p * p + gen.c1 * p + gen.c0;
  }
  return c;
}

namespace {

/// Smallest uniform relaxation t >= 0 of all flow limits that admits a
/// dispatch: min t s.t. the DC-OPF rows with h_flow + t.
double flow_relaxation(const QpProblem& qp, const QpOptions& options) {
  const auto nx = qp.hdiag.size();
  const auto m = qp.g.rows();
  const auto nflow = static_cast<Eigen::Index>(2 * qp.layout.num_branches);
  QpProblem e;
  e.layout = qp.layout;
  e.hdiag = Vector::Zero(nx + 1);
  e.hdiag.head(static_cast<Eigen::Index>(qp.layout.num_generators)).setConstant(kCurvatureFloor);
  e.hdiag[nx] = kCurvatureFloor;
  e.c = Vector::Zero(nx + 1);
  e.c[nx] = 1.0;
  e.curvature_floor = Vector::Zero(nx + 1);
  e.a_eq = qp.a_eq;
  e.a_eq.conservativeResize(qp.a_eq.rows(), nx + 1);
  e.b_eq = qp.b_eq;
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index r = 0; r < m; ++r)
    for (SparseMatrix::InnerIterator it(qp.g, r); it; ++it) t.emplace_back(r, it.col(), it.value());
  for (Eigen::Index r = 0; r < nflow; ++r) t.emplace_back(r, nx, -1.0);
  t.emplace_back(m, nx, -1.0);
  e.g = SparseMatrix(m + 1, nx + 1);
  e.g.setFromTriplets(t.begin(), t.end());
  e.h = Vector::Zero(m + 1);
  e.h.head(m) = qp.h;
  QpOptions o = options;
  o.polish = false;
  o.max_iter = std::max(options.max_iter, 200);
  return solve_qp(e, o).x[nx];
}

}  // namespace

DcOpfSolution solve_dcopf(const NetworkModel& net, const DcParams& params, const Vector& pd,
                          const QpOptions& options) {
  DcOpfSolution out;
  out.problem = build_qp(net, params, pd);
  const auto& lay = out.problem.layout;

  // Every machine output feeds the aggregate balance sum(pg) = sum(pd) + sum(gamma).
  const double need = pd.sum() + params.gamma.sum();
  double pmax = 0.0, pmin = 0.0;
  for (const auto& g : net.generators) {
    pmax += g.pmax;
    pmin += g.pmin;
  }
  const double slack = 1e-9 * (1.0 + std::abs(need));
  if (need > pmax + slack || need < pmin - slack)
    throw Error(Errc::PrimalInfeasible, "demand plus injection bias " + std::to_string(need) +
                                            " p.u. outside the dispatch range [" + std::to_string(pmin) + ", " +
                                            std::to_string(pmax) + "]");

  try {
    out.solution = solve_qp(out.problem, options);
  } catch (const Error& e) {
    if (e.code() != Errc::MaxIterations && e.code() != Errc::PrimalInfeasible && e.code() != Errc::Unbounded) throw;
    // Tell infeasible flow limits apart from a solver failure on a feasible problem.
    double t = 0.0;
    try {
      t = flow_relaxation(out.problem, options);
    } catch (const Error&) {
      throw e;
    }
    if (t > 1e-7)
      throw Error(Errc::PrimalInfeasible,
                  "flow limits cannot all be met; the smallest uniform relaxation is " + std::to_string(t) + " p.u.");
    if (e.code() != Errc::MaxIterations)
      throw Error(Errc::MaxIterations, std::string("feasible problem not solved (") + e.what() + ")");
    throw;
  }
  const auto& x = out.solution.x;
  const auto ng = static_cast<Eigen::Index>(lay.num_generators);
  const auto nn = static_cast<Eigen::Index>(lay.num_buses);
  const auto ne = static_cast<Eigen::Index>(lay.num_branches);
  out.pg = x.head(ng);
  out.theta = x.tail(nn);
  out.flow = params.b.cwiseProduct(out.problem.bindings.incidence * out.theta) + params.rho;
  out.nu = out.solution.y.head(nn);
  out.lambda_up = out.solution.z.head(ne);
  out.lambda_lo = out.solution.z.segment(ne, ne);
  out.objective = dispatch_cost(net, out.pg);
  out.degenerate = out.solution.degenerate_rows > 0 || out.problem.curvature_floor.any();
  return out;
}

}  // namespace dcopt
