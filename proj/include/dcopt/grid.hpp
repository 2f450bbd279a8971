#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace dcopt {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;

inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();

/// One bus, all quantities per-unit on the system base.
struct Bus {
  int id = 0;
  int type = 1;  // MATPOWER bus type (1 PQ, 2 PV, 3 ref)
  double pd = 0.0;
  double qd = 0.0;
  double gs = 0.0;  // shunt conductance
  double bs = 0.0;  // shunt susceptance
  double vmax = 1.1;
  double vmin = 0.9;
  double vm0 = 1.0;  // case-file voltage, used only as a warm start
  double va0 = 0.0;  // rad
  bool is_reference = false;
};

/// In-service branch between two dense bus indices.
struct Branch {
  std::size_t from = 0;
  std::size_t to = 0;
  double r = 0.0;
  double x = 0.0;
  double charging = 0.0;  // total line charging susceptance
  double tap = 1.0;       // off-nominal ratio, 1 for lines
  double shift = 0.0;     // rad
  double rating = 0.0;    // thermal limit on |S| (sentinel when the case says unlimited)
  double angmin = -kUnlimited;
  double angmax = kUnlimited;
};

/// In-service machine; costs are c2*p^2 + c1*p + c0 with p in p.u.
struct Generator {
  std::size_t bus = 0;
  double pmin = 0.0;
  double pmax = 0.0;
  double qmin = -kUnlimited;
  double qmax = kUnlimited;
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
  double vg = 1.0;  // voltage setpoint
  double pg0 = 0.0;
  double qg0 = 0.0;
};

struct NetworkModel {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::size_t reference = 0;
  std::vector<int> bus_ids;  // dense index -> original id
  std::unordered_map<int, std::size_t> index_of_id;

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_branches() const { return branches.size(); }
  std::size_t num_generators() const { return generators.size(); }

  Vector nominal_pd() const;
  Vector nominal_qd() const;
  /// Machines attached to each bus.
  std::vector<std::vector<std::size_t>> generators_at_bus() const;
};

/// Checks the structural invariants (reference bus, x != 0, bounds ordered,
/// connectivity). Throws dcopt::Error.
void validate(const NetworkModel& net);

/// Per-bus demand for one operating point, p.u.
struct Demand {
  Vector pd;
  Vector qd;
};

/// Tunable DC power-flow parameters.
struct DcParams {
  Vector b;      // per branch
  Vector gamma;  // per bus
  Vector rho;    // per branch

  std::size_t size() const { return b.size() + gamma.size() + rho.size(); }
  /// Stacked as [b; gamma; rho].
  Vector flatten() const;
  static DcParams unflatten(const Vector& x, std::size_t num_branches, std::size_t num_buses);
  bool operator==(const DcParams&) const = default;
};

void check_dimensions(const NetworkModel& net, const DcParams& params);

/// AC operating point.
struct AcState {
  Vector vm;
  Vector va;  // rad, reference angle 0
  Vector pg;  // per machine
  Vector qg;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// |E| x |N| incidence: +1 at the from-bus, -1 at the to-bus.
SparseMatrix incidence(const NetworkModel& net);

/// MATPOWER two-port admittances of one branch: I_f = yff V_f + yft V_t and
/// I_t = ytf V_f + ytt V_t.
struct TwoPort {
  Complex yff, yft, ytf, ytt;
};

TwoPort two_port(const Branch& br);

/// Series/shunt split of the two-port in the pi form
/// S_jk = conj(Y_jk + Yc_jk)|V_j|^2 - conj(Y_jk) V_j conj(V_k).
struct BranchAdmittance {
  Complex y_jk, y_kj, yc_jk, yc_kj;
};

std::vector<BranchAdmittance> branch_admittance(const NetworkModel& net);

enum class ColdStartMode {
  SeriesSusceptance,  // b = Im(-1/(r + jx)) = x / (r^2 + x^2)
  InverseReactance,   // b = 1/x
};

DcParams cold_start(const NetworkModel& net, ColdStartMode mode = ColdStartMode::SeriesSusceptance);

/// Localized-loss hot start from a converged AC operating point. The nominal
/// state is checked against `demand` and must balance to `mismatch_tol`.
DcParams hot_start(const NetworkModel& net, const AcState& nominal, const Demand& demand,
                   double mismatch_tol = 1e-8);

/// sin(x)/x, exact at 0 and without cancellation near it.
double sinc(double x);

}  // namespace dcopt
