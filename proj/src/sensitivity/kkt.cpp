#include "dcopt/sensitivity.hpp"

#include <string>

#include "dcopt/error.hpp"
#include "dcsolve/linsolve.hpp"

namespace dcopt {

namespace {

using SpMat = detail::LinearSolver::SpMat;

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

struct KktSystem::Factor {
  detail::LinearSolver lu;
  bool dense = true;
};

KktSystem::KktSystem() : factor_(std::make_unique<Factor>()) {}
KktSystem::KktSystem(KktSystem&&) noexcept = default;
KktSystem& KktSystem::operator=(KktSystem&&) noexcept = default;
KktSystem::~KktSystem() = default;

Eigen::Index KktSystem::dimension() const { return k_.rows(); }

Eigen::MatrixXd KktSystem::matrix() const { return Eigen::MatrixXd(k_); }

Vector KktSystem::solve(const Vector& rhs) const {
  if (rhs.size() != k_.rows())
    throw Error(Errc::DimensionMismatch, "KKT right-hand side has length " + std::to_string(rhs.size()));
  Vector v = factor_->lu.solve(rhs);
  if (!v.allFinite()) throw Error(Errc::SingularKkt, "KKT solve produced non-finite values");
  // The sparse factorization has no condition estimate, so check the solve itself.
  if (!factor_->dense) {
    const double scale = inf_norm(rhs) + inf_norm(Vector(k_.cwiseAbs() * v.cwiseAbs()));
    if (inf_norm(Vector(k_ * v - rhs)) > 1e-8 * std::max(scale, 1e-300))
      throw Error(Errc::SingularKkt, "KKT solve is inaccurate; system is numerically singular");
  }
  return v;
}

Vector KktSystem::param_jacobian_action(const DcParams& d) const {
  const auto ne = static_cast<Eigen::Index>(layout_.num_branches);
  const auto nn = static_cast<Eigen::Index>(layout_.num_buses);
  if (d.b.size() != ne || d.rho.size() != ne || d.gamma.size() != nn)
    throw Error(Errc::DimensionMismatch, "parameter direction does not match the KKT system");
  const auto nx = nx_;
  const auto neq = neq_;
  const auto ng = static_cast<Eigen::Index>(layout_.num_generators);

  Vector out = Vector::Zero(k_.rows());
  const Vector dbu = d.b.cwiseProduct(u_);
  out.segment(ng, nn) = incidence_.transpose() * d.b.cwiseProduct(mu_ - w_);
  out.segment(nx, nn) = -(incidence_.transpose() * (dbu + d.rho)) - d.gamma;
  for (std::size_t r = 0; r < active_.size(); ++r) {
    const auto row = active_[r];
    const auto pos = nx + neq + static_cast<Eigen::Index>(r);
    if (row < layout_.num_branches) {
      out[pos] = dbu[static_cast<Eigen::Index>(row)] + d.rho[static_cast<Eigen::Index>(row)];
    } else if (row < 2 * layout_.num_branches) {
      const auto e = static_cast<Eigen::Index>(row - layout_.num_branches);
      out[pos] = -dbu[e] - d.rho[e];
    }
  }
  return out;
}

KktSystem assemble_kkt(const QpProblem& qp, const QpSolution& sol, const KktOptions& options) {
  const auto& lay = qp.layout;
  const auto nx = qp.hdiag.size();
  const auto neq = qp.a_eq.rows();
  const auto ng = static_cast<Eigen::Index>(lay.num_generators);
  const auto nn = static_cast<Eigen::Index>(lay.num_buses);
  const auto ne = static_cast<Eigen::Index>(lay.num_branches);
  if (sol.x.size() != nx || sol.y.size() != neq || sol.z.size() != qp.h.size() ||
      sol.activity.size() != static_cast<std::size_t>(qp.h.size()))
    throw Error(Errc::DimensionMismatch, "QP solution does not match the problem");
  if (!(sol.residual <= options.residual_tol))
    throw Error(Errc::NotOptimal, "QP residual " + std::to_string(sol.residual) + " above " +
                                      std::to_string(options.residual_tol));

  KktSystem kkt;
  kkt.layout_ = lay;
  kkt.nx_ = nx;
  kkt.neq_ = neq;
  kkt.incidence_ = qp.bindings.incidence.size() ? qp.bindings.incidence : SparseMatrix(ne, nn);
  kkt.regularization_ = options.regularization;
  for (std::size_t i = 0; i < sol.activity.size(); ++i) {
    switch (sol.activity[i]) {
      case RowActivity::Active: kkt.active_.push_back(i); break;
      case RowActivity::Degenerate:
        if (options.policy == DegeneracyPolicy::Strict)
          throw Error(Errc::SingularKkt, "inequality row " + std::to_string(i) + " is degenerate");
        ++kkt.degenerate_;
        break;
      case RowActivity::Inactive: break;
    }
  }

  const Vector theta = sol.x.segment(ng, nn);
  kkt.u_ = kkt.incidence_ * theta;
  kkt.w_ = kkt.incidence_ * sol.y.head(nn);
  kkt.mu_ = Vector::Zero(ne);
  for (auto row : kkt.active_) {
    if (row < lay.num_branches) kkt.mu_[static_cast<Eigen::Index>(row)] += sol.z[static_cast<Eigen::Index>(row)];
    else if (row < 2 * lay.num_branches)
      kkt.mu_[static_cast<Eigen::Index>(row - lay.num_branches)] -= sol.z[static_cast<Eigen::Index>(row)];
  }

  const auto na = static_cast<Eigen::Index>(kkt.active_.size());
  const double delta = options.regularization;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nx + 2 * (qp.a_eq.nonZeros() + qp.g.nonZeros()) + neq + na));
  for (Eigen::Index i = 0; i < nx; ++i) t.emplace_back(i, i, qp.hdiag[i] + delta);
  for (Eigen::Index r = 0; r < qp.a_eq.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(qp.a_eq, r); it; ++it) {
      t.emplace_back(nx + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), nx + it.row(), it.value());
    }
  for (Eigen::Index r = 0; r < na; ++r)
    for (SparseMatrix::InnerIterator it(qp.g, static_cast<Eigen::Index>(kkt.active_[static_cast<std::size_t>(r)])); it; ++it) {
      t.emplace_back(nx + neq + r, it.col(), it.value());
      t.emplace_back(it.col(), nx + neq + r, it.value());
    }
  if (delta > 0.0)
    for (Eigen::Index i = nx; i < nx + neq + na; ++i) t.emplace_back(i, i, -delta);
  kkt.k_ = SparseMatrix(nx + neq + na, nx + neq + na);
  kkt.k_.setFromTriplets(t.begin(), t.end());

  kkt.factor_->dense = lay.num_buses <= options.dense_bus_limit;
  const SpMat k = kkt.k_;
  if (!kkt.factor_->lu.factorize(k, kkt.factor_->dense, kkt.factor_->dense ? options.rcond_min : 0.0))
    throw Error(Errc::SingularKkt, "KKT matrix with " + std::to_string(na) + " active rows is singular");
  return kkt;
}

DcParams adjoint_gradient(const KktSystem& kkt, const Vector& seed) {
  const auto& lay = kkt.layout_;
  const auto ng = static_cast<Eigen::Index>(lay.num_generators);
  const auto nn = static_cast<Eigen::Index>(lay.num_buses);
  const auto ne = static_cast<Eigen::Index>(lay.num_branches);
  if (seed.size() != ng) throw Error(Errc::DimensionMismatch, "seed has length " + std::to_string(seed.size()));
  DcParams g{Vector::Zero(ne), Vector::Zero(nn), Vector::Zero(ne)};
  if ((seed.array() == 0.0).all()) return g;

  const auto nx = kkt.nx_;
  const auto neq = kkt.neq_;
  Vector rhs = Vector::Zero(kkt.dimension());
  rhs.head(ng) = seed;
  const Vector v = kkt.solve(rhs);

  // g = -F_p^T v, written out per parameter family.
  const Vector v_bal = v.segment(nx, nn);
  Vector v_up = Vector::Zero(ne), v_lo = Vector::Zero(ne);
  for (std::size_t r = 0; r < kkt.active_.size(); ++r) {
    const auto row = kkt.active_[r];
    const double val = v[nx + neq + static_cast<Eigen::Index>(r)];
    if (row < lay.num_branches) v_up[static_cast<Eigen::Index>(row)] = val;
    else if (row < 2 * lay.num_branches) v_lo[static_cast<Eigen::Index>(row - lay.num_branches)] = val;
  }
  const Vector a_theta = kkt.incidence_ * v.segment(ng, nn);
  const Vector a_bal = kkt.incidence_ * v_bal;
  g.b = -(a_theta.cwiseProduct(kkt.mu_ - kkt.w_) - a_bal.cwiseProduct(kkt.u_) + (v_up - v_lo).cwiseProduct(kkt.u_));
  g.gamma = v_bal;
  g.rho = a_bal - v_up + v_lo;
  return g;
}

Vector forward_directional(const KktSystem& kkt, const DcParams& direction) {
  const Vector rhs = -kkt.param_jacobian_action(direction);
  const auto ng = static_cast<Eigen::Index>(kkt.layout().num_generators);
  if ((rhs.array() == 0.0).all()) return Vector::Zero(ng);
  return kkt.solve(rhs).head(ng);
}

Vector kkt_residual(const KktSystem& kkt, const QpProblem& qp, const QpSolution& point) {
  const auto nx = kkt.nx_;
  const auto neq = kkt.neq_;
  const auto na = static_cast<Eigen::Index>(kkt.active_.size());
  if (qp.hdiag.size() != nx || qp.a_eq.rows() != neq)
    throw Error(Errc::DimensionMismatch, "QP does not match the KKT system");
  Vector z = Vector::Zero(qp.h.size());
  for (auto row : kkt.active_) z[static_cast<Eigen::Index>(row)] = point.z[static_cast<Eigen::Index>(row)];

  Vector r(nx + neq + na);
  r.head(nx) = qp.hdiag.cwiseProduct(point.x) + qp.c + qp.a_eq.transpose() * point.y + qp.g.transpose() * z;
  r.segment(nx, neq) = qp.a_eq * point.x - qp.b_eq;
  const Vector gx = qp.g * point.x - qp.h;
  for (Eigen::Index i = 0; i < na; ++i) r[nx + neq + i] = gx[static_cast<Eigen::Index>(kkt.active_[static_cast<std::size_t>(i)])];
  return r;
}

}  // namespace dcopt
