#include <cmath>
#include <limits>

#include "dcopt/error.hpp"
#include "dcopt/train.hpp"

namespace dcopt {

namespace {

struct LineSearch {
  bool accepted = false;
  double step = 0.0;
  double f = 0.0;
  Vector x, g;
};

/// Halves the step until sufficient decrease holds and the directional
/// derivative has not overshot past c2 |slope|. A step that stops short of
/// the curvature window is accepted, since halving cannot lengthen it.
///
/// Once the predicted decrease is below the rounding error of f, sufficient
/// decrease cannot be observed; the step is then accepted if f does not rise
/// and the gradient shrinks.
LineSearch wolfe_backtrack(const Objective& f, const Vector& x, double fx, const Vector& g, const Vector& s,
                           double slope, const TncOptions& o) {
  constexpr double kRoundoff = 64.0 * std::numeric_limits<double>::epsilon();
  LineSearch ls;
  ls.g.resize(x.size());
  for (double beta = 1.0; beta >= o.min_step; beta *= 0.5) {
    ls.x = x + beta * s;
    ls.f = f(ls.x, ls.g);
    if (!std::isfinite(ls.f)) continue;
    const double predicted = o.wolfe_c1 * beta * slope;
    const bool armijo = ls.f <= fx + predicted;
    const bool in_noise = -predicted <= kRoundoff * std::abs(fx) && ls.f <= fx && ls.g.norm() < g.norm();
    if (!armijo && !in_noise) continue;
    if (ls.g.dot(s) > o.wolfe_c2 * std::abs(slope)) continue;
    ls.accepted = true;
    ls.step = beta;
    return ls;
  }
  return ls;
}

}  // namespace

TncResult tnc_minimize(const Objective& f, const Vector& x0, const TncOptions& o) {
  if (!x0.allFinite()) throw Error(Errc::InvalidConfig, "starting point is not finite");
  const auto n = x0.size();
  TncResult res;
  auto& rep = res.report;
  Vector x = x0;
  Vector g(n);
  double fx = f(x, g);
  if (!std::isfinite(fx)) throw Error(Errc::InvalidConfig, "objective is not finite at the starting point");
  rep.loss.push_back(fx);
  rep.grad_norm.push_back(g.norm());
  rep.termination = "max_iterations";

  Vector g2_sum = Vector::Zero(n);
  for (int k = 0;; ++k) {
    const double gnorm = g.norm();
    if (gnorm <= o.tol) {
      rep.termination = "converged";
      break;
    }
    if (k >= o.max_iter) break;

    Vector minv = Vector::Ones(n);
    if (o.diagonal_preconditioner) {
      g2_sum += g.cwiseAbs2();
      const Vector m = (g2_sum / static_cast<double>(k + 1)).cwiseSqrt();
      const double floor = std::max(1e-8 * m.maxCoeff(), std::numeric_limits<double>::min());
      minv = m.cwiseMax(floor).cwiseInverse();
    }

    // Inner preconditioned CG on H s = -g with finite-difference products.
    const double eta = std::min(o.cg_tol, std::sqrt(gnorm));
    const double eps = o.hessian_step * (1.0 + x.norm());
    Vector s = Vector::Zero(n);
    Vector r = -g;
    Vector z = minv.cwiseProduct(r);
    Vector p = z;
    double rz = r.dot(z);
    int cg = 0;
    Vector gp(n);
    while (cg < o.cg_max_iter) {
      const double pn = p.norm();
      if (pn == 0.0) break;
      const double h = eps / pn;
      Vector q;
      if (std::isfinite(f(x + h * p, gp))) {
        q = (gp - g) / h;
      } else if (std::isfinite(f(x - h * p, gp))) {
        q = (g - gp) / h;
      } else {
        break;
      }
      ++cg;
      const double curv = p.dot(q);
      if (!(curv > 0.0)) {
        if (cg == 1) s = p;  // no curvature information: preconditioned steepest descent
        break;
      }
      const double alpha = rz / curv;
      s += alpha * p;
      r -= alpha * q;
      if (r.norm() <= eta * gnorm) break;
      z = minv.cwiseProduct(r);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    rep.cg_iterations.push_back(cg);

    if (!(s.squaredNorm() > 0.0)) s = -minv.cwiseProduct(g);
    double slope = g.dot(s);
    bool steepest = false;
    if (!(slope < 0.0)) {
      ++rep.nondescent_steps;
      s = -g;
      slope = -g.squaredNorm();
      steepest = true;
    }
    auto ls = wolfe_backtrack(f, x, fx, g, s, slope, o);
    if (!ls.accepted && !steepest) {
      ls = wolfe_backtrack(f, x, fx, g, -g, -g.squaredNorm(), o);
    }
    if (!ls.accepted) {
      ++rep.line_search_failures;
      rep.termination = "line_search_failed";
      break;
    }
    x = std::move(ls.x);
    g = std::move(ls.g);
    fx = ls.f;
    rep.step_size.push_back(ls.step);
    rep.loss.push_back(fx);
    rep.grad_norm.push_back(g.norm());
  }
  res.x = x;
  return res;
}

}  // namespace dcopt
