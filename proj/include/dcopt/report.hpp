#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dcopt/grid.hpp"

namespace dcopt {

/// Dispatch error of one parameter set against AC-OPF labels.
struct Metrics {
  std::string name;
  std::size_t scenario_count = 0;
  std::size_t generator_count = 0;
  double mse = 0.0;        // (1/(|G||M|)) sum_m ||p_m - p_m^AC||_2^2
  double max_error = 0.0;  // max_m ||p_m - p_m^AC||_inf
  std::vector<int> scenario_ids;
  std::vector<double> scenario_sq_error;   // ||p_m - p_m^AC||_2^2
  std::vector<double> scenario_max_error;  // ||p_m - p_m^AC||_inf

  bool operator==(const Metrics&) const = default;
};

/// 100 * (baseline - value) / baseline; 0 when the baseline is 0.
double improvement_percent(double baseline, double value);

/// Offline training history.
struct TrainReport {
  std::string init_mode;
  std::string termination;
  std::vector<double> loss;       // entry 0 is the initial loss
  std::vector<double> grad_norm;  // aligned with loss
  std::vector<double> step_size;  // one per accepted outer iteration
  std::vector<int> cg_iterations;
  std::size_t degeneracy_warnings = 0;
  std::size_t line_search_failures = 0;
  std::size_t nondescent_steps = 0;
  std::size_t excluded_scenarios = 0;
  double wall_time_s = 0.0;
  DcParams final_params;

  std::size_t iterations() const { return step_size.size(); }
  bool operator==(const TrainReport&) const = default;
};

struct RunReport {
  std::string case_id;
  std::optional<TrainReport> training;
  std::vector<Metrics> metrics;

  bool operator==(const RunReport&) const = default;
};

}  // namespace dcopt
