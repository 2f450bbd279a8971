#include <string>

#include "dcopt/error.hpp"
#include "dcopt/parallel.hpp"
#include "dcopt/train.hpp"

namespace dcopt {

TrainingSet make_training_set(const NetworkModel& net, const ScenarioFile& scenarios, const LabelFile& labels) {
  if (scenarios.case_id != net.name)
    throw Error(Errc::CrossReferenceError, "scenario file is for case '" + scenarios.case_id + "', not '" + net.name + "'");
  if (scenarios.num_buses != net.num_buses())
    throw Error(Errc::LengthMismatch, "scenario file has " + std::to_string(scenarios.num_buses) + " buses");
  validate_labels(labels, scenarios);
  if (labels.num_generators != net.num_generators())
    throw Error(Errc::LengthMismatch, "labels have " + std::to_string(labels.num_generators) + " generators");

  TrainingSet set;
  for (const auto& s : scenarios.scenarios) {
    const Label* label = labels.find(s.id);
    if (label->status != LabelStatus::Optimal) {
      ++set.excluded;
      continue;
    }
    set.ids.push_back(s.id);
    set.pd.push_back(s.pd);
    set.target.push_back(label->pg);
  }
  if (set.ids.empty())
    throw Error(Errc::EmptyEvaluation, "no scenario has an optimal label (" + std::to_string(set.excluded) + " excluded)");
  return set;
}

namespace {

struct ScenarioTerm {
  Vector pg;
  double sq_error = 0.0;
  Vector gradient;
  std::size_t warnings = 0;
};

ScenarioTerm scenario_term(const NetworkModel& net, const DcParams& params, const Vector& pd, const Vector& target,
                           int id, double weight, bool with_gradient, const LossOptions& options) {
  ScenarioTerm term;
  DcOpfSolution sol;
  try {
    sol = solve_dcopf(net, params, pd, options.qp);
  } catch (const Error& e) {
    if (e.code() != Errc::PrimalInfeasible) throw;
    throw Error(Errc::LowerLevelInfeasible, "scenario " + std::to_string(id) + ": " + e.what());
  }
  const Vector diff = sol.pg - target;
  term.pg = std::move(sol.pg);
  term.sq_error = diff.squaredNorm();
  if (!with_gradient) return term;

  const Vector seed = 2.0 * weight * diff;
  auto gradient_with = [&](const KktOptions& kkt_options) {
    const auto kkt = assemble_kkt(sol.problem, sol.solution, kkt_options);
    term.warnings = kkt.degenerate_resolved();
    return adjoint_gradient(kkt, seed).flatten();
  };
  try {
    term.gradient = gradient_with(options.kkt);
  } catch (const Error& e) {
    if (e.code() != Errc::SingularKkt) throw;
    // Without strict complementarity the map has a kink here; a small
    // regularization picks a deterministic element of the subdifferential.
    KktOptions reg = options.kkt;
    reg.policy = DegeneracyPolicy::Resolve;
    reg.regularization = 1e-9 * (1.0 + sol.problem.hdiag.cwiseAbs().maxCoeff() + params.b.cwiseAbs().maxCoeff());
    term.gradient = gradient_with(reg);
    ++term.warnings;
  }
  return term;
}

}  // namespace

LossEvaluation evaluate_loss(const NetworkModel& net, const TrainingSet& set, const DcParams& params,
                             bool with_gradient, const LossOptions& options) {
  check_dimensions(net, params);
  if (set.size() == 0) throw Error(Errc::EmptyEvaluation, "training set is empty");
  const double count = static_cast<double>(net.num_generators()) * static_cast<double>(set.size());
  const double weight = 1.0 / count;

  std::vector<ScenarioTerm> terms(set.size());
  parallel_for(
      set.size(),
      [&](std::size_t m) {
        terms[m] = scenario_term(net, params, set.pd[m], set.target[m], set.ids[m], weight, with_gradient, options);
      },
      options.workers);

  // Fixed-order reduction keeps results independent of the worker count.
  LossEvaluation out;
  double sum = 0.0;
  if (with_gradient) out.gradient = Vector::Zero(params.size());
  for (auto& t : terms) {
    sum += t.sq_error;
    if (with_gradient) out.gradient += t.gradient;
    out.degeneracy_warnings += t.warnings;
    out.dispatch.push_back(std::move(t.pg));
  }
  out.loss = sum / count;  // same expression a reader of the per-scenario errors would use
  return out;
}

double loss(const DcParams& params, const ScenarioFile& scenarios, const LabelFile& labels, const NetworkModel& net) {
  return evaluate_loss(net, make_training_set(net, scenarios, labels), params, false).loss;
}

Vector loss_gradient(const DcParams& params, const ScenarioFile& scenarios, const LabelFile& labels,
                     const NetworkModel& net) {
  return evaluate_loss(net, make_training_set(net, scenarios, labels), params, true).gradient;
}

}  // namespace dcopt
