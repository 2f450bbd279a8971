#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "dcopt/error.hpp"
#include "dcopt/train.hpp"

namespace dcopt {

std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Cold: return "cold";
    case InitMode::Hot: return "hot";
    case InitMode::Both: return "both";
  }
  return "cold";
}

InitMode parse_init_mode(std::string_view text) {
  if (text == "cold") return InitMode::Cold;
  if (text == "hot") return InitMode::Hot;
  if (text == "both") return InitMode::Both;
  throw Error(Errc::InvalidConfig, "unknown initialization '" + std::string(text) + "' (cold, hot, both)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::InvalidConfig, msg); };
  if (train_count < 1 || test_count < 1) fail("scenario counts must be at least 1");
  if (!(sigma >= 0.0)) fail("sigma must be nonnegative");
  if (!(0.0 < tnc.wolfe_c1 && tnc.wolfe_c1 < tnc.wolfe_c2 && tnc.wolfe_c2 < 1.0))
    fail("Wolfe constants must satisfy 0 < c1 < c2 < 1");
  if (tnc.max_iter < 0) fail("max_iter must be nonnegative");
  if (tnc.cg_max_iter < 1) fail("cg_max_iter must be at least 1");
  if (!(tnc.tol >= 0.0)) fail("tolerance must be nonnegative");
  if (!(tnc.cg_tol > 0.0)) fail("cg_tol must be positive");
  if (!(tnc.hessian_step > 0.0)) fail("hessian_step must be positive");
  if (!(tnc.min_step > 0.0 && tnc.min_step < 1.0)) fail("min_step must lie in (0, 1)");
}

namespace {

bool outside_domain(Errc code) {
  return code == Errc::LowerLevelInfeasible || code == Errc::MaxIterations || code == Errc::Unbounded ||
         code == Errc::DimensionMismatch;
}

TrainResult train_from(const NetworkModel& net, const TrainingSet& set, const TrainConfig& config,
                       const DcParams& init, std::string_view mode) {
  // Fails loudly if the starting point itself is infeasible.
  evaluate_loss(net, set, init, false, config.loss);

  std::size_t warnings = 0;
  const Objective f = [&](const Vector& x, Vector& grad) {
    try {
      const auto ev = evaluate_loss(net, set, DcParams::unflatten(x, net.num_branches(), net.num_buses()), true,
                                    config.loss);
      grad = ev.gradient;
      warnings += ev.degeneracy_warnings;
      return ev.loss;
    } catch (const Error& e) {
      if (!outside_domain(e.code())) throw;
      return std::numeric_limits<double>::infinity();
    }
  };
  auto res = tnc_minimize(f, init.flatten(), config.tnc);
  TrainResult out;
  out.params = DcParams::unflatten(res.x, net.num_branches(), net.num_buses());
  out.report = std::move(res.report);
  out.report.init_mode = std::string(mode);
  out.report.degeneracy_warnings = warnings;
  out.report.excluded_scenarios = set.excluded;
  out.report.final_params = out.params;
  return out;
}

}  // namespace

TrainResult train(const NetworkModel& net, const ScenarioFile& scenarios, const LabelFile& labels,
                  const TrainConfig& config, const std::optional<AcState>& nominal) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto set = make_training_set(net, scenarios, labels);

  auto hot = [&] {
    if (!nominal) throw Error(Errc::InvalidConfig, "hot initialization needs a nominal AC state");
    return hot_start(net, *nominal, Demand{net.nominal_pd(), net.nominal_qd()});
  };

  TrainResult result;
  switch (config.init) {
    case InitMode::Cold: result = train_from(net, set, config, cold_start(net, config.cold_mode), "cold"); break;
    case InitMode::Hot: result = train_from(net, set, config, hot(), "hot"); break;
    case InitMode::Both: {
      auto c = train_from(net, set, config, cold_start(net, config.cold_mode), "cold");
      auto h = train_from(net, set, config, hot(), "hot");
      result = h.report.loss.back() < c.report.loss.back() ? std::move(h) : std::move(c);
      break;
    }
  }
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainResult train(const NetworkModel& net, const ScenarioFile& scenarios, const LabelFile& labels,
                  const TrainConfig& config, const DcParams& initial) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto set = make_training_set(net, scenarios, labels);
  if (initial.b.size() != static_cast<Eigen::Index>(net.num_branches()) ||
      initial.rho.size() != static_cast<Eigen::Index>(net.num_branches()) ||
      initial.gamma.size() != static_cast<Eigen::Index>(net.num_buses()))
    throw Error(Errc::DimensionMismatch, "initial parameters do not match case " + net.name);
  auto result = train_from(net, set, config, initial, "given");
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Metrics make_metrics(const NetworkModel& net, const TrainingSet& set, const LossEvaluation& eval, std::string name) {
  Metrics m;
  m.name = std::move(name);
  m.scenario_count = set.size();
  m.generator_count = net.num_generators();
  m.mse = eval.loss;
  m.scenario_ids = set.ids;
  for (std::size_t k = 0; k < set.size(); ++k) {
    const Vector diff = eval.dispatch[k] - set.target[k];
    m.scenario_sq_error.push_back(diff.squaredNorm());
    m.scenario_max_error.push_back(diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0);
  }
  m.max_error = m.scenario_max_error.empty()
                    ? 0.0
                    : *std::max_element(m.scenario_max_error.begin(), m.scenario_max_error.end());
  return m;
}

Metrics evaluate(const NetworkModel& net, const DcParams& params, const ScenarioFile& scenarios,
                 const LabelFile& labels, std::string name, const LossOptions& options) {
  const auto set = make_training_set(net, scenarios, labels);
  return make_metrics(net, set, evaluate_loss(net, set, params, false, options), std::move(name));
}

}  // namespace dcopt
