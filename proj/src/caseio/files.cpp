#include <fstream>
#include <set>
#include <sstream>

#include "dcopt/caseio.hpp"
#include "dcopt/error.hpp"
#include "textio.hpp"

namespace dcopt {
namespace {

constexpr int kScenarioVersion = 1;
constexpr int kLabelVersion = 1;
constexpr int kParamsVersion = 1;
constexpr int kReportVersion = 1;

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::FileNotFound, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  return in;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(Errc::FileNotFound, "write failed: " + path.string());
}

std::string single_token(const std::string& s, const textio::Reader& r, std::string_view what) {
  const auto toks = textio::split(s);
  if (toks.size() != 1) r.fail("expected a single token for " + std::string(what));
  return std::string(toks[0]);
}

void check_token(std::string_view s, std::string_view what) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string_view::npos)
    throw Error(Errc::InvalidConfig, std::string(what) + " must be a non-empty token without whitespace: '" +
                                         std::string(s) + "'");
}

template <typename T>
Vector to_vector(const std::vector<T>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i]);
  return out;
}

}  // namespace

double improvement_percent(double baseline, double value) {
  if (baseline == 0.0) return 0.0;
  return 100.0 * (baseline - value) / baseline;
}

// ---------------------------------------------------------------------------
// scenarios 1
// case <id>
// seed <uint64>
// sigma <fraction>
// buses <n>
// count <m>
// then per scenario: "scenario <id>", "pd <n values>", "qd <n values>"

void write_scenarios(const std::filesystem::path& path, const ScenarioFile& file) {
  check_token(file.case_id, "case id");
  for (const auto& s : file.scenarios) {
    if (static_cast<std::size_t>(s.pd.size()) != file.num_buses ||
        static_cast<std::size_t>(s.qd.size()) != file.num_buses)
      throw Error(Errc::LengthMismatch, "scenario " + std::to_string(s.id) + " does not have " +
                                            std::to_string(file.num_buses) + " entries");
  }
  auto out = open_out(path);
  out << "scenarios " << kScenarioVersion << '\n';
  out << "case " << file.case_id << '\n';
  out << "seed " << file.seed << '\n';
  out << "sigma " << format_double(file.sigma) << '\n';
  out << "buses " << file.num_buses << '\n';
  out << "count " << file.scenarios.size() << '\n';
  for (const auto& s : file.scenarios) {
    out << "scenario " << s.id << '\n';
    textio::write_vector(out, "pd", s.pd);
    textio::write_vector(out, "qd", s.qd);
  }
  close_out(out, path);
}

ScenarioFile read_scenarios(const std::filesystem::path& path) {
  auto in = open_in(path);
  textio::Reader r(in, path.string());
  r.header("scenarios", kScenarioVersion);
  ScenarioFile f;
  f.case_id = single_token(r.text("case"), r, "case");
  const auto seed_tok = single_token(r.text("seed"), r, "seed");
  std::istringstream(seed_tok) >> f.seed;
  f.sigma = r.number("sigma");
  const auto n = r.integer("buses");
  const auto count = r.integer("count");
  if (n < 0 || count < 0) r.fail("negative size");
  f.num_buses = static_cast<std::size_t>(n);
  std::set<int> ids;
  for (long long k = 0; k < count; ++k) {
    Scenario s;
    s.id = static_cast<int>(r.integer("scenario"));
    if (!ids.insert(s.id).second) r.fail("duplicate scenario id " + std::to_string(s.id));
    s.pd = r.vector("pd", n);
    s.qd = r.vector("qd", n);
    f.scenarios.push_back(std::move(s));
  }
  if (!r.at_end()) r.fail("trailing content after " + std::to_string(count) + " scenarios");
  return f;
}

// ---------------------------------------------------------------------------
// labels 1
// case <id>
// generators <g>
// buses <n>
// count <m>
// then per record: "label <scenario id> <status> <objective>", "pg ...", "vm ...", "va ..."

std::string_view to_string(LabelStatus status) {
  switch (status) {
    case LabelStatus::Optimal: return "optimal";
    case LabelStatus::Infeasible: return "infeasible";
    case LabelStatus::Failed: return "failed";
  }
  return "failed";
}

const Label* LabelFile::find(int scenario_id) const {
  for (const auto& l : labels)
    if (l.scenario_id == scenario_id) return &l;
  return nullptr;
}

void write_labels(const std::filesystem::path& path, const LabelFile& file) {
  check_token(file.case_id, "case id");
  auto out = open_out(path);
  out << "labels " << kLabelVersion << '\n';
  out << "case " << file.case_id << '\n';
  out << "generators " << file.num_generators << '\n';
  out << "buses " << file.num_buses << '\n';
  out << "count " << file.labels.size() << '\n';
  for (const auto& l : file.labels) {
    out << "label " << l.scenario_id << ' ' << to_string(l.status) << ' ' << format_double(l.objective) << '\n';
    textio::write_vector(out, "pg", l.pg);
    textio::write_vector(out, "vm", l.vm);
    textio::write_vector(out, "va", l.va);
  }
  close_out(out, path);
}

LabelFile read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  textio::Reader r(in, path.string());
  r.header("labels", kLabelVersion);
  LabelFile f;
  f.case_id = single_token(r.text("case"), r, "case");
  const auto ng = r.integer("generators");
  const auto nb = r.integer("buses");
  const auto count = r.integer("count");
  if (ng < 0 || nb < 0 || count < 0) r.fail("negative size");
  f.num_generators = static_cast<std::size_t>(ng);
  f.num_buses = static_cast<std::size_t>(nb);
  for (long long k = 0; k < count; ++k) {
    const auto toks = r.tokens("label");
    if (toks.size() != 3) r.fail("label record needs '<id> <status> <objective>'");
    Label l;
    l.scenario_id = static_cast<int>(textio::to_integer(toks[0], r));
    if (toks[1] == "optimal") l.status = LabelStatus::Optimal;
    else if (toks[1] == "infeasible") l.status = LabelStatus::Infeasible;
    else if (toks[1] == "failed") l.status = LabelStatus::Failed;
    else r.fail("unknown label status '" + std::string(toks[1]) + "'");
    l.objective = textio::to_number(toks[2], r);
    l.pg = r.vector("pg", ng);
    l.vm = r.vector("vm", nb);
    l.va = r.vector("va", nb);
    f.labels.push_back(std::move(l));
  }
  if (!r.at_end()) r.fail("trailing content after " + std::to_string(count) + " labels");
  return f;
}

void validate_labels(const LabelFile& labels, const ScenarioFile& scenarios) {
  if (labels.case_id != scenarios.case_id)
    throw Error(Errc::CrossReferenceError,
                "labels are for case '" + labels.case_id + "', scenarios for '" + scenarios.case_id + "'");
  if (labels.num_buses != scenarios.num_buses)
    throw Error(Errc::LengthMismatch, "label bus count differs from scenario bus count");
  std::set<int> scenario_ids;
  for (const auto& s : scenarios.scenarios) scenario_ids.insert(s.id);
  std::set<int> seen;
  for (const auto& l : labels.labels) {
    if (!scenario_ids.contains(l.scenario_id))
      throw Error(Errc::CrossReferenceError, "label references unknown scenario " + std::to_string(l.scenario_id));
    if (!seen.insert(l.scenario_id).second)
      throw Error(Errc::CrossReferenceError, "duplicate label for scenario " + std::to_string(l.scenario_id));
    if (static_cast<std::size_t>(l.pg.size()) != labels.num_generators)
      throw Error(Errc::LengthMismatch, "label " + std::to_string(l.scenario_id) + " has wrong pg length");
  }
  if (seen.size() != scenario_ids.size())
    throw Error(Errc::CrossReferenceError, std::to_string(scenario_ids.size() - seen.size()) +
                                               " scenario(s) have no label");
}

// ---------------------------------------------------------------------------
// params 1
// name <name>
// case <case id>
// branches <ne>
// buses <nn>
// then "branch <from id> <to id> <b> <rho>" per branch and "bus <id> <gamma>" per bus.

void write_params(const std::filesystem::path& path, const NetworkModel& net, const DcParams& params,
                  std::string_view name) {
  check_dimensions(net, params);
  check_token(name, "parameter set name");
  auto out = open_out(path);
  out << "params " << kParamsVersion << '\n';
  out << "name " << name << '\n';
  out << "case " << (net.name.empty() ? std::string("-") : net.name) << '\n';
  out << "branches " << net.num_branches() << '\n';
  out << "buses " << net.num_buses() << '\n';
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    const auto& br = net.branches[e];
    const auto i = static_cast<Eigen::Index>(e);
    out << "branch " << net.bus_ids[br.from] << ' ' << net.bus_ids[br.to] << ' ' << format_double(params.b[i])
        << ' ' << format_double(params.rho[i]) << '\n';
  }
  for (std::size_t k = 0; k < net.num_buses(); ++k)
    out << "bus " << net.bus_ids[k] << ' ' << format_double(params.gamma[static_cast<Eigen::Index>(k)]) << '\n';
  close_out(out, path);
}

DcParams read_params(const std::filesystem::path& path, const NetworkModel& net) {
  auto in = open_in(path);
  textio::Reader r(in, path.string());
  r.header("params", kParamsVersion);
  r.text("name");
  r.text("case");
  const auto ne = r.integer("branches");
  const auto nn = r.integer("buses");
  if (ne != static_cast<long long>(net.num_branches()) || nn != static_cast<long long>(net.num_buses()))
    throw Error(Errc::LengthMismatch, path.string() + ": parameter file has " + std::to_string(ne) + " branches and " +
                                          std::to_string(nn) + " buses, network has " +
                                          std::to_string(net.num_branches()) + " and " +
                                          std::to_string(net.num_buses()));
  DcParams p{Vector(ne), Vector(nn), Vector(ne)};
  for (long long e = 0; e < ne; ++e) {
    const auto toks = r.tokens("branch");
    if (toks.size() != 4) r.fail("branch record needs '<from> <to> <b> <rho>'");
    const auto& br = net.branches[static_cast<std::size_t>(e)];
    if (textio::to_integer(toks[0], r) != net.bus_ids[br.from] || textio::to_integer(toks[1], r) != net.bus_ids[br.to])
      throw Error(Errc::CrossReferenceError, path.string() + ": branch " + std::to_string(e + 1) +
                                                 " endpoints do not match the network");
    p.b[e] = textio::to_number(toks[2], r);
    p.rho[e] = textio::to_number(toks[3], r);
  }
  for (long long k = 0; k < nn; ++k) {
    const auto toks = r.tokens("bus");
    if (toks.size() != 2) r.fail("bus record needs '<id> <gamma>'");
    if (textio::to_integer(toks[0], r) != net.bus_ids[static_cast<std::size_t>(k)])
      throw Error(Errc::CrossReferenceError, path.string() + ": bus " + std::to_string(k + 1) +
                                                 " id does not match the network");
    p.gamma[k] = textio::to_number(toks[1], r);
  }
  if (!r.at_end()) r.fail("trailing content");
  return p;
}

// ---------------------------------------------------------------------------
// report 1
// case <id>
// training <0|1>, followed by the training block when 1
// metrics <count>, then per entry: "metric <name> <scenarios> <generators> <mse> <max error>",
// "ids ...", "sq_error ...", "max_error ..."

void write_report(const std::filesystem::path& path, const RunReport& report) {
  check_token(report.case_id, "case id");
  for (const auto& m : report.metrics) {
    if (m.scenario_count == 0) throw Error(Errc::EmptyEvaluation, "metrics '" + m.name + "' cover no scenarios");
    check_token(m.name, "metrics name");
  }
  auto out = open_out(path);
  out << "report " << kReportVersion << '\n';
  out << "case " << report.case_id << '\n';
  out << "training " << (report.training ? 1 : 0) << '\n';
  if (report.training) {
    const auto& t = *report.training;
    out << "init_mode " << t.init_mode << '\n';
    out << "termination " << t.termination << '\n';
    textio::write_vector(out, "loss", to_vector(t.loss));
    textio::write_vector(out, "grad_norm", to_vector(t.grad_norm));
    textio::write_vector(out, "step_size", to_vector(t.step_size));
    out << "cg_iterations";
    for (int c : t.cg_iterations) out << ' ' << c;
    out << '\n';
    out << "degeneracy_warnings " << t.degeneracy_warnings << '\n';
    out << "line_search_failures " << t.line_search_failures << '\n';
    out << "nondescent_steps " << t.nondescent_steps << '\n';
    out << "excluded_scenarios " << t.excluded_scenarios << '\n';
    out << "wall_time_s " << format_double(t.wall_time_s) << '\n';
    textio::write_vector(out, "final_b", t.final_params.b);
    textio::write_vector(out, "final_gamma", t.final_params.gamma);
    textio::write_vector(out, "final_rho", t.final_params.rho);
  }
  out << "metrics " << report.metrics.size() << '\n';
  for (const auto& m : report.metrics) {
    out << "metric " << m.name << ' ' << m.scenario_count << ' ' << m.generator_count << ' ' << format_double(m.mse)
        << ' ' << format_double(m.max_error) << '\n';
    out << "ids";
    for (int id : m.scenario_ids) out << ' ' << id;
    out << '\n';
    textio::write_vector(out, "sq_error", to_vector(m.scenario_sq_error));
    textio::write_vector(out, "max_error", to_vector(m.scenario_max_error));
  }
  close_out(out, path);
}

RunReport read_report(const std::filesystem::path& path) {
  auto in = open_in(path);
  textio::Reader r(in, path.string());
  r.header("report", kReportVersion);
  RunReport rep;
  rep.case_id = single_token(r.text("case"), r, "case");
  if (r.integer("training") != 0) {
    TrainReport t;
    t.init_mode = r.text("init_mode");
    t.termination = r.text("termination");
    t.loss = r.doubles("loss");
    t.grad_norm = r.doubles("grad_norm");
    t.step_size = r.doubles("step_size");
    for (auto tok : r.tokens("cg_iterations"))
      t.cg_iterations.push_back(static_cast<int>(textio::to_integer(tok, r)));
    t.degeneracy_warnings = static_cast<std::size_t>(r.integer("degeneracy_warnings"));
    t.line_search_failures = static_cast<std::size_t>(r.integer("line_search_failures"));
    t.nondescent_steps = static_cast<std::size_t>(r.integer("nondescent_steps"));
    t.excluded_scenarios = static_cast<std::size_t>(r.integer("excluded_scenarios"));
    t.wall_time_s = r.number("wall_time_s");
    t.final_params.b = r.vector("final_b");
    t.final_params.gamma = r.vector("final_gamma");
    t.final_params.rho = r.vector("final_rho");
    rep.training = std::move(t);
  }
  const auto count = r.integer("metrics");
  for (long long k = 0; k < count; ++k) {
    const auto toks = r.tokens("metric");
    if (toks.size() != 5) r.fail("metric record needs '<name> <scenarios> <generators> <mse> <max error>'");
    Metrics m;
    m.name = std::string(toks[0]);
    m.scenario_count = static_cast<std::size_t>(textio::to_integer(toks[1], r));
    m.generator_count = static_cast<std::size_t>(textio::to_integer(toks[2], r));
    m.mse = textio::to_number(toks[3], r);
    m.max_error = textio::to_number(toks[4], r);
    for (auto tok : r.tokens("ids")) m.scenario_ids.push_back(static_cast<int>(textio::to_integer(tok, r)));
    m.scenario_sq_error = r.doubles("sq_error");
    m.scenario_max_error = r.doubles("max_error");
    const auto n = m.scenario_ids.size();
    if (m.scenario_sq_error.size() != n || m.scenario_max_error.size() != n || n != m.scenario_count)
      throw Error(Errc::LengthMismatch, path.string() + ": metrics '" + m.name + "' has inconsistent lengths");
    rep.metrics.push_back(std::move(m));
  }
  if (!r.at_end()) r.fail("trailing content");
  return rep;
}

}  // namespace dcopt
