#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dcopt/grid.hpp"
#include "dcopt/report.hpp"

namespace dcopt {

using Row = std::vector<double>;

/// MATPOWER tables as read, columns in file order.
struct RawCase {
  std::string name;
  double base_mva = 0.0;
  std::vector<Row> bus;
  std::vector<Row> gen;
  std::vector<Row> branch;
  std::vector<Row> gencost;
};

RawCase parse_matpower(std::string_view text);
RawCase read_matpower(const std::filesystem::path& path);

struct NetworkOptions {
  /// Substituted for rateA = 0 (MATPOWER "no limit"), p.u.
  double unlimited_rating = 100.0;
};

NetworkModel to_network(const RawCase& raw, const NetworkOptions& options = {});

/// read_matpower + to_network, naming the network after the file stem when
/// the case has no function name.
NetworkModel load_network(const std::filesystem::path& path, const NetworkOptions& options = {});

// ---------------------------------------------------------------------------
// Persisted files. Every file starts with "<kind> <version>" and stores power
// in p.u. on the case base.

struct Scenario {
  int id = 0;
  Vector pd;
  Vector qd;
  bool operator==(const Scenario&) const = default;
};

struct ScenarioFile {
  std::string case_id;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  std::size_t num_buses = 0;
  std::vector<Scenario> scenarios;

  Demand demand(std::size_t k) const { return {scenarios[k].pd, scenarios[k].qd}; }
  bool operator==(const ScenarioFile&) const = default;
};

void write_scenarios(const std::filesystem::path& path, const ScenarioFile& file);
ScenarioFile read_scenarios(const std::filesystem::path& path);

enum class LabelStatus { Optimal, Infeasible, Failed };
std::string_view to_string(LabelStatus status);

struct Label {
  int scenario_id = 0;
  LabelStatus status = LabelStatus::Failed;
  double objective = 0.0;
  Vector pg;
  Vector vm;
  Vector va;
  bool operator==(const Label&) const = default;
};

struct LabelFile {
  std::string case_id;
  std::size_t num_generators = 0;
  std::size_t num_buses = 0;
  std::vector<Label> labels;

  const Label* find(int scenario_id) const;
  bool operator==(const LabelFile&) const = default;
};

void write_labels(const std::filesystem::path& path, const LabelFile& file);
LabelFile read_labels(const std::filesystem::path& path);

/// Labels must belong to the same case and carry exactly one record per
/// scenario. Throws CrossReferenceError / LengthMismatch.
void validate_labels(const LabelFile& labels, const ScenarioFile& scenarios);

/// Parameter sets are keyed by original bus ids so they can be checked
/// against the network they are loaded for.
void write_params(const std::filesystem::path& path, const NetworkModel& net, const DcParams& params,
                  std::string_view name);
DcParams read_params(const std::filesystem::path& path, const NetworkModel& net);

void write_report(const std::filesystem::path& path, const RunReport& report);
RunReport read_report(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace dcopt
