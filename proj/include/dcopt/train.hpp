#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcopt/caseio.hpp"
#include "dcopt/dcsolve.hpp"
#include "dcopt/report.hpp"
#include "dcopt/sensitivity.hpp"

namespace dcopt {

/// Normal(1, sigma) factor per loaded bus, applied to both pd and qd so the
/// power factor is kept. Nonpositive draws are redrawn. Ids run 1..n.
ScenarioFile generate_scenarios(const NetworkModel& net, std::size_t n, double sigma, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Loss over a labelled scenario set

/// Scenarios paired with optimal labels, in scenario-file order.
struct TrainingSet {
  std::vector<int> ids;
  std::vector<Vector> pd;
  std::vector<Vector> target;  // AC-OPF dispatch per scenario
  std::size_t excluded = 0;    // scenarios whose label is not optimal

  std::size_t size() const { return ids.size(); }
};

/// Validates labels against scenarios and the network and drops non-optimal
/// labels. Throws EmptyEvaluation when nothing is left.
TrainingSet make_training_set(const NetworkModel& net, const ScenarioFile& scenarios, const LabelFile& labels);

struct LossOptions {
  QpOptions qp;
  KktOptions kkt;
  std::size_t workers = 0;  // 0: worker_count()
};

struct LossEvaluation {
  double loss = 0.0;
  Vector gradient;                   // flattened (b, gamma, rho); empty unless requested
  std::vector<Vector> dispatch;      // DC dispatch per scenario
  std::size_t degeneracy_warnings = 0;
};

/// L = 1/(|G||M|) sum_m ||pg_m - target_m||^2, and its gradient when asked.
/// Throws LowerLevelInfeasible naming the first failing scenario.
LossEvaluation evaluate_loss(const NetworkModel& net, const TrainingSet& set, const DcParams& params,
                             bool with_gradient, const LossOptions& options = {});

double loss(const DcParams& params, const ScenarioFile& scenarios, const LabelFile& labels, const NetworkModel& net);
Vector loss_gradient(const DcParams& params, const ScenarioFile& scenarios, const LabelFile& labels,
                     const NetworkModel& net);

// ---------------------------------------------------------------------------
// Truncated Newton

/// Returns f(x) and writes the gradient. A non-finite value marks x as
/// outside the domain; the line search then shortens the step.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct TncOptions {
  double tol = 1e-6;  // on the gradient 2-norm
  int max_iter = 100;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int cg_max_iter = 50;
  /// Inner CG stops at ||r|| <= min(cg_tol, sqrt(||g||)) ||g||.
  double cg_tol = 1e-2;
  /// Hessian products use gradient differences with step hessian_step (1 + ||x||).
  double hessian_step = 1e-7;
  bool diagonal_preconditioner = false;
  double min_step = 1e-12;
};

struct TncResult {
  Vector x;
  TrainReport report;  // final_params left empty
};

TncResult tnc_minimize(const Objective& f, const Vector& x0, const TncOptions& options = {});

// ---------------------------------------------------------------------------
// Training and evaluation

enum class InitMode {
  Cold,
  Hot,
  Both,  // train from both and keep the lower final loss
};
std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view text);

struct TrainConfig {
  std::size_t train_count = 20;
  std::size_t test_count = 2000;
  double sigma = 0.15;
  std::uint64_t seed = 1;
  InitMode init = InitMode::Cold;
  ColdStartMode cold_mode = ColdStartMode::SeriesSusceptance;
  TncOptions tnc;
  LossOptions loss;

  /// Throws InvalidConfig.
  void validate() const;
};

struct TrainResult {
  DcParams params;
  TrainReport report;
};

/// `nominal` is required for hot or both initialization; see nominal_state.
TrainResult train(const NetworkModel& net, const ScenarioFile& scenarios, const LabelFile& labels,
                  const TrainConfig& config, const std::optional<AcState>& nominal = std::nullopt);

/// Warm start from explicit parameters; config.init is ignored and the report says "given".
TrainResult train(const NetworkModel& net, const ScenarioFile& scenarios, const LabelFile& labels,
                  const TrainConfig& config, const DcParams& initial);

/// Metrics of an already evaluated set.
Metrics make_metrics(const NetworkModel& net, const TrainingSet& set, const LossEvaluation& eval, std::string name);

Metrics evaluate(const NetworkModel& net, const DcParams& params, const ScenarioFile& scenarios,
                 const LabelFile& labels, std::string name, const LossOptions& options = {});

}  // namespace dcopt
