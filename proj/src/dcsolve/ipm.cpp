#include <algorithm>
#include <cmath>

#include "dcopt/dcsolve.hpp"
#include "dcopt/error.hpp"
#include "linsolve.hpp"

namespace dcopt {
namespace {

using SpMat = Eigen::SparseMatrix<double>;

constexpr double kStepFraction = 0.995;
constexpr double kDivergence = 1e12;
constexpr double kPolishStart = 1e-4;

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Largest alpha in (0, 1] with v + alpha dv >= 0.
double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

/// [H + G^T W G, A^T; A, 0] with W diagonal (W may be empty).
SpMat reduced_kkt(const Vector& hdiag, const SpMat& a, const SpMat& g, const Vector& w) {
  const auto nx = hdiag.size();
  const auto neq = a.rows();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nx + 2 * a.nonZeros() + 4 * g.nonZeros()));
  for (Eigen::Index i = 0; i < nx; ++i) t.emplace_back(i, i, hdiag[i]);
  if (w.size() > 0) {
    const SpMat gwg = SpMat(g.transpose() * w.asDiagonal() * g);
    for (Eigen::Index c = 0; c < gwg.outerSize(); ++c)
      for (SpMat::InnerIterator it(gwg, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  for (Eigen::Index c = 0; c < a.outerSize(); ++c)
    for (SpMat::InnerIterator it(a, c); it; ++it) {
      t.emplace_back(nx + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), nx + it.row(), it.value());
    }
  SpMat k(nx + neq, nx + neq);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

struct Scaled {
  Vector hdiag, c;
  SpMat a, g;
  double k = 1.0;  // objective multiplier
};

/// Solves the equality-constrained problem with the rows in `active` pinned.
/// Returns false if the system is singular or the result is not a KKT point.
bool polish(const QpProblem& qp, const Scaled& sp, const std::vector<int>& active, bool dense, double tol,
            QpSolution& sol) {
  const auto nx = sp.hdiag.size();
  const auto neq = sp.a.rows();
  const auto na = static_cast<Eigen::Index>(active.size());
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index c = 0; c < sp.a.outerSize(); ++c)
    for (SpMat::InnerIterator it(sp.a, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index r = 0; r < na; ++r)
    for (SparseMatrix::InnerIterator it(qp.g, active[static_cast<std::size_t>(r)]); it; ++it)
      t.emplace_back(neq + r, it.col(), it.value());
  SpMat aa(neq + na, nx);
  aa.setFromTriplets(t.begin(), t.end());
  const SpMat k = reduced_kkt(sp.hdiag, aa, sp.g, Vector());

  detail::LinearSolver lu;
  if (!lu.factorize(k, dense, dense ? 1e-14 : 0.0)) return false;
  Vector rhs(nx + neq + na);
  rhs.head(nx) = -sp.c;
  rhs.segment(nx, neq) = qp.b_eq;
  for (Eigen::Index r = 0; r < na; ++r) rhs[nx + neq + r] = qp.h[active[static_cast<std::size_t>(r)]];
  const Vector sol_vec = lu.solve(rhs);
  if (!sol_vec.allFinite()) return false;

  const Vector x = sol_vec.head(nx);
  const Vector slack = qp.h - qp.g * x;
  Vector z = Vector::Zero(qp.h.size());
  for (Eigen::Index r = 0; r < na; ++r) z[active[static_cast<std::size_t>(r)]] = sol_vec[nx + neq + r] / sp.k;
  const Vector y = sol_vec.segment(nx, neq) / sp.k;

  // Accept only a genuine KKT point.
  const double xs = 1.0 + inf_norm(x);
  if (inf_norm(qp.a_eq * x - qp.b_eq) > tol * (1.0 + inf_norm(qp.b_eq)) * 10.0) return false;
  for (Eigen::Index i = 0; i < slack.size(); ++i)
    if (slack[i] < -tol * xs * 10.0 * (1.0 + std::abs(qp.h[i]))) return false;
  if (z.size() && z.minCoeff() * sp.k < -tol * 10.0) return false;

  sol.x = x;
  sol.y = y;
  sol.z = z.cwiseMax(0.0);
  sol.slack = slack.cwiseMax(0.0);
  for (int r : active) sol.slack[r] = 0.0;
  sol.polished = true;
  // Same scaled measures as the interior loop.
  const Vector rd = sp.hdiag.cwiseProduct(x) + sp.c + sp.k * (sp.a.transpose() * sol.y + sp.g.transpose() * sol.z);
  const double rp = std::max(inf_norm(qp.a_eq * x - qp.b_eq) / (1.0 + inf_norm(qp.b_eq)),
                             inf_norm((qp.g * x - qp.h).cwiseMax(0.0)) / (1.0 + inf_norm(qp.h)));
  const double mu = qp.h.size() ? sp.k * sol.z.dot(sol.slack) / static_cast<double>(qp.h.size()) : 0.0;
  sol.residual = std::max({rp, inf_norm(rd) / (1.0 + inf_norm(sp.c)), mu});
  return true;
}

}  // namespace

double normalized_slack(const QpProblem& qp, const QpSolution& sol, std::size_t row) {
  const auto r = static_cast<Eigen::Index>(row);
  return sol.slack[r] / (1.0 + std::abs(qp.h[r]));
}

QpSolution solve_qp(const QpProblem& qp, const QpOptions& options) {
  const auto nx = qp.hdiag.size();
  const auto neq = qp.a_eq.rows();
  const auto m = qp.g.rows();
  if (qp.c.size() != nx || qp.a_eq.cols() != nx || qp.b_eq.size() != neq || qp.g.cols() != nx || qp.h.size() != m)
    throw Error(Errc::DimensionMismatch, "inconsistent QP data");
  const bool dense = qp.layout.num_buses <= options.dense_bus_limit;

  Scaled sp;
  sp.k = 1.0 / std::max({1.0, inf_norm(qp.c), inf_norm(qp.hdiag)});
  sp.hdiag = qp.hdiag * sp.k;
  sp.c = qp.c * sp.k;
  sp.a = qp.a_eq;
  sp.g = qp.g;
  const SpMat at = sp.a.transpose();
  const SpMat gt = sp.g.transpose();

  // Starting point: dispatch at the middle of its box, angles flat.
  Vector x = Vector::Zero(nx);
  for (std::size_t k = 0; k < qp.layout.bounded_generators.size(); ++k) {
    const auto g = qp.layout.bounded_generators[k];
    const double hi = qp.h[static_cast<Eigen::Index>(qp.layout.box_upper_row(k))];
    const double lo = -qp.h[static_cast<Eigen::Index>(qp.layout.box_lower_row(k))];
    x[static_cast<Eigen::Index>(qp.layout.pg_var(g))] = 0.5 * (lo + hi);
  }
  Vector y = Vector::Zero(neq);
  Vector s = (qp.h - qp.g * x).cwiseMax(1.0);
  Vector z = Vector::Ones(m);

  const double bnorm = 1.0 + inf_norm(qp.b_eq);
  const double hnorm = 1.0 + inf_norm(qp.h);
  const double cnorm = 1.0 + inf_norm(sp.c);

  detail::LinearSolver lu;
  QpSolution sol;
  bool converged = false;
  bool finished_by_polish = false;
  std::vector<int> last_guess{-1};
  double rp_norm = 0.0;
  auto guess_active = [&] {
    std::vector<int> guess;
    for (Eigen::Index i = 0; i < m; ++i)
      if (z[i] > s[i]) guess.push_back(static_cast<int>(i));
    return guess;
  };
  for (int it = 0;; ++it) {
    const Vector rd = sp.hdiag.cwiseProduct(x) + sp.c + at * y + gt * z;
    const Vector rp = sp.a * x - qp.b_eq;
    const Vector rg = qp.g * x + s - qp.h;
    const double mu = m ? s.dot(z) / static_cast<double>(m) : 0.0;
    rp_norm = std::max(inf_norm(rp) / bnorm, inf_norm(rg) / hnorm);
    const double rd_norm = inf_norm(rd) / cnorm;
    sol.iterations = it;
    sol.residual = std::max({rp_norm, rd_norm, mu});
    if (rp_norm <= options.tol && rd_norm <= options.tol && mu <= options.tol) {
      converged = true;
      break;
    }
    // Close to a solution, an exact solve on the apparent active set is
    // accepted as soon as it verifies; the interior iterates themselves can
    // stall above tol once z/s is badly scaled. Each guess is tried once.
    if (options.polish && m && sol.residual <= kPolishStart && guess_active() != last_guess) {
      last_guess = guess_active();
      QpSolution trial = sol;
      if (polish(qp, sp, last_guess, dense, options.tol, trial) && trial.residual <= options.tol) {
        sol = std::move(trial);
        converged = finished_by_polish = true;
        break;
      }
    }
    if (it >= options.max_iter) break;
    if (inf_norm(x) > kDivergence) throw Error(Errc::Unbounded, "QP iterates diverged");
    if (m && inf_norm(z) > kDivergence) throw Error(Errc::PrimalInfeasible, "QP multipliers diverged");

    const Vector w = m ? Vector(z.cwiseQuotient(s)) : Vector();
    if (!lu.factorize(reduced_kkt(sp.hdiag, sp.a, sp.g, w), dense))
      throw Error(Errc::PrimalInfeasible, "QP Newton system is singular");

    auto direction = [&](const Vector& rsz, Vector& dx, Vector& dy, Vector& ds, Vector& dz) {
      Vector rhs(nx + neq);
      if (m) {
        const Vector t = w.cwiseProduct(rg) - rsz.cwiseQuotient(s);
        rhs.head(nx) = -rd - gt * t;
      } else {
        rhs.head(nx) = -rd;
      }
      rhs.tail(neq) = -rp;
      const Vector d = lu.solve(rhs);
      dx = d.head(nx);
      dy = d.tail(neq);
      if (m) {
        ds = -rg - qp.g * dx;
        dz = w.cwiseProduct(qp.g * dx + rg) - rsz.cwiseQuotient(s);
      }
    };

    Vector dx, dy, ds, dz;
    if (m == 0) {
      direction(Vector(), dx, dy, ds, dz);
      x += dx;
      y += dy;
      continue;
    }
    // Predictor.
    const Vector sz = s.cwiseProduct(z);
    direction(sz, dx, dy, ds, dz);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3.0);
    // Corrector.
    const Vector rsz = sz + ds.cwiseProduct(dz) - Vector::Constant(m, sigma * mu);
    direction(rsz, dx, dy, ds, dz);
    const double alpha = std::min(1.0, kStepFraction * std::min(max_step(s, ds), max_step(z, dz)));
    if (!dx.allFinite() || !dz.allFinite()) throw Error(Errc::PrimalInfeasible, "QP step is not finite");
    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
  }
  if (!converged) {
    if (rp_norm > 1e3 * options.tol)
      throw Error(Errc::PrimalInfeasible, "QP primal residual " + std::to_string(rp_norm) + " after " +
                                              std::to_string(sol.iterations) + " iterations");
    throw Error(Errc::MaxIterations, "QP not converged after " + std::to_string(sol.iterations) + " iterations");
  }

  if (!finished_by_polish) {
    sol.x = x;
    sol.y = y / sp.k;
    sol.z = z / sp.k;
    sol.slack = s;
    if (options.polish && m) polish(qp, sp, guess_active(), dense, options.tol, sol);
  }

  sol.activity.assign(static_cast<std::size_t>(m), RowActivity::Inactive);
  sol.degenerate_rows = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sl = normalized_slack(qp, sol, static_cast<std::size_t>(i));
    const double lam = sol.z[i] * sp.k;
    if (sl > options.act_tol) continue;
    if (lam > options.act_tol) {
      sol.activity[static_cast<std::size_t>(i)] = RowActivity::Active;
    } else {
      sol.activity[static_cast<std::size_t>(i)] = RowActivity::Degenerate;
      ++sol.degenerate_rows;
    }
  }
  sol.objective = 0.5 * sol.x.dot(qp.hdiag.cwiseProduct(sol.x)) + qp.c.dot(sol.x) + qp.c0;
  return sol;
}

}  // namespace dcopt
