#include "cli.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcopt/acsolve.hpp"
#include "dcopt/caseio.hpp"
#include "dcopt/parallel.hpp"

namespace dcopt::cli {

int exit_code(Errc code) { return kErrorBase + static_cast<int>(code); }

namespace {

namespace fs = std::filesystem;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string config_hash(const nlohmann::json& j) { return sha256_tag(j.dump()); }

void make_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

fs::path manifest_for_file(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

void check_scenarios(const NetworkModel& net, const ScenarioFile& sc) {
  if (sc.case_id != net.name)
    throw Error(Errc::CrossReferenceError, "scenario file is for case '" + sc.case_id + "', not '" + net.name + "'");
  if (sc.num_buses != net.num_buses())
    throw Error(Errc::LengthMismatch, "scenario file has " + std::to_string(sc.num_buses) + " buses, case has " +
                                          std::to_string(net.num_buses()));
}

void check_labels(const NetworkModel& net, const LabelFile& labels) {
  if (labels.case_id != net.name)
    throw Error(Errc::CrossReferenceError, "label file is for case '" + labels.case_id + "', not '" + net.name + "'");
  if (labels.num_generators != net.num_generators() || labels.num_buses != net.num_buses())
    throw Error(Errc::LengthMismatch, "label file dimensions do not match case " + net.name);
}

/// Scenario records [skip, skip + limit), with the labels for exactly those ids.
std::pair<ScenarioFile, LabelFile> select(const ScenarioFile& sc, const LabelFile& labels, std::size_t skip,
                                          std::size_t limit) {
  ScenarioFile s = sc;
  s.scenarios.clear();
  for (std::size_t k = skip; k < sc.scenarios.size() && s.scenarios.size() < limit; ++k)
    s.scenarios.push_back(sc.scenarios[k]);
  std::set<int> ids;
  for (const auto& x : s.scenarios) ids.insert(x.id);
  LabelFile l = labels;
  l.labels.clear();
  for (const auto& x : labels.labels)
    if (ids.count(x.scenario_id)) l.labels.push_back(x);
  return {std::move(s), std::move(l)};
}

LabelStatus label_status(AcOpfStatus s) {
  switch (s) {
    case AcOpfStatus::Optimal: return LabelStatus::Optimal;
    case AcOpfStatus::Infeasible: return LabelStatus::Infeasible;
    default: return LabelStatus::Failed;
  }
}

// ---------------------------------------------------------------------------

struct ScenariosArgs {
  std::string case_path, config, out;
  std::size_t count = 2020;
  double sigma = 0.15;
  std::uint64_t seed = 1;
};

int cmd_scenarios(const ScenariosArgs& a, const CLI::App& app, RunManifest m, std::ostream& out) {
  const auto net = load_network(a.case_path);
  std::size_t count = a.count;
  double sigma = a.sigma;
  std::uint64_t seed = a.seed;
  if (!a.config.empty()) {
    const auto cfg = read_train_config(a.config);
    if (app.count("--count") == 0) count = cfg.train_count + cfg.test_count;
    if (app.count("--sigma") == 0) sigma = cfg.sigma;
    if (app.count("--seed") == 0) seed = cfg.seed;
    m.inputs.push_back(a.config);
  }
  const auto file = generate_scenarios(net, count, sigma, seed);
  const fs::path path = a.out;
  make_parent(path);
  write_scenarios(path, file);
  if (!(read_scenarios(path) == file)) throw Error(Errc::MalformedRow, "scenario file did not read back identically");

  m.case_id = net.name;
  m.config_hash = config_hash({{"case_id", net.name}, {"count", count}, {"sigma", sigma}, {"seed", seed}});
  m.seed = seed;
  m.has_seed = true;
  m.inputs.insert(m.inputs.begin(), a.case_path);
  m.outputs = {path};
  m.finished_utc = utc_now();
  write_manifest(manifest_for_file(path), m);
  out << "wrote " << count << " scenarios (sigma " << sigma << ", seed " << seed << ") to " << path.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct LabelArgs {
  std::string case_path, scenarios, out, import;
  double tol = 1e-6;
  int max_iter = 200;
};

int cmd_label(const LabelArgs& a, RunManifest m, std::ostream& out) {
  const auto net = load_network(a.case_path);
  const auto sc = read_scenarios(a.scenarios);
  check_scenarios(net, sc);
  m.inputs = {a.case_path, a.scenarios};

  LabelFile labels;
  if (!a.import.empty()) {
    labels = read_labels(a.import);
    check_labels(net, labels);
    validate_labels(labels, sc);
    m.inputs.push_back(a.import);
    m.config_hash = config_hash({{"mode", "import"}});
  } else {
    labels.case_id = net.name;
    labels.num_generators = net.num_generators();
    labels.num_buses = net.num_buses();
    labels.labels.resize(sc.scenarios.size());
    AcOpfOptions opts;
    opts.tol = a.tol;
    opts.max_iter = a.max_iter;
    parallel_for(sc.scenarios.size(), [&](std::size_t k) {
      Label& l = labels.labels[k];
      l.scenario_id = sc.scenarios[k].id;
      try {
        const auto sol = solve_acopf(net, sc.demand(k), opts);
        l.status = label_status(sol.status);
        l.objective = sol.objective;
        l.pg = sol.state.pg;
        l.vm = sol.state.vm;
        l.va = sol.state.va;
      } catch (const Error&) {
        l.status = LabelStatus::Failed;
        l.objective = 0.0;
        l.pg = Vector::Zero(static_cast<Eigen::Index>(net.num_generators()));
        l.vm = Vector::Ones(static_cast<Eigen::Index>(net.num_buses()));
        l.va = Vector::Zero(static_cast<Eigen::Index>(net.num_buses()));
      }
    });
    m.config_hash = config_hash({{"mode", "solve"}, {"tol", opts.tol}, {"max_iter", opts.max_iter}});
  }

  const fs::path path = a.out;
  make_parent(path);
  write_labels(path, labels);
  if (!(read_labels(path) == labels)) throw Error(Errc::MalformedRow, "label file did not read back identically");
  m.case_id = net.name;
  m.outputs = {path};
  m.finished_utc = utc_now();
  write_manifest(manifest_for_file(path), m);

  std::map<LabelStatus, std::size_t> tally;
  for (const auto& l : labels.labels) ++tally[l.status];
  out << "labels: " << tally[LabelStatus::Optimal] << " optimal, " << tally[LabelStatus::Infeasible]
      << " infeasible, " << tally[LabelStatus::Failed] << " failed -> " << path.string() << '\n';
  const std::size_t bad = labels.labels.size() - tally[LabelStatus::Optimal];
  return 2 * bad > labels.labels.size() ? kLabelFailures : kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string case_path, scenarios, labels, config, out;
};

int cmd_train(const TrainArgs& a, RunManifest m, std::ostream& out) {
  const auto net = load_network(a.case_path);
  const auto sc_all = read_scenarios(a.scenarios);
  const auto labels_all = read_labels(a.labels);
  check_scenarios(net, sc_all);
  check_labels(net, labels_all);
  validate_labels(labels_all, sc_all);
  const TrainConfig cfg = a.config.empty() ? TrainConfig{} : read_train_config(a.config);
  cfg.validate();
  if (sc_all.scenarios.size() < cfg.train_count)
    throw Error(Errc::InvalidConfig, "train_count " + std::to_string(cfg.train_count) + " exceeds the " +
                                         std::to_string(sc_all.scenarios.size()) + " scenarios on file");
  const auto [sc, labels] = select(sc_all, labels_all, 0, cfg.train_count);

  std::optional<AcState> nominal;
  if (cfg.init != InitMode::Cold) nominal = nominal_state(net);
  const auto result = train(net, sc, labels, cfg, nominal);

  RunReport report;
  report.case_id = net.name;
  report.training = result.report;
  report.metrics.push_back(evaluate(net, result.params, sc, labels, "trained", cfg.loss));

  const fs::path dir = a.out;
  fs::create_directories(dir);
  const fs::path params_path = dir / "params.txt";
  const fs::path report_path = dir / "train_report.txt";
  write_params(params_path, net, result.params, "trained");
  write_report(report_path, report);
  if (!(read_params(params_path, net) == result.params) || !(read_report(report_path) == report))
    throw Error(Errc::MalformedRow, "training outputs did not read back identically");

  m.case_id = net.name;
  m.config_hash = config_hash(nlohmann::json::parse(canonical_config(cfg)));
  m.seed = cfg.seed;
  m.has_seed = true;
  m.inputs = {a.case_path, a.scenarios, a.labels};
  if (!a.config.empty()) m.inputs.push_back(a.config);
  m.outputs = {params_path, report_path};
  m.finished_utc = utc_now();
  write_manifest(dir / "train.manifest.json", m);

  const auto& r = result.report;
  out << "init " << r.init_mode << ", " << r.iterations() << " iterations, termination " << r.termination << '\n';
  out << "iter  loss                     grad_norm                step      cg\n";
  for (std::size_t k = 0; k < r.loss.size(); ++k) {
    out << std::left << std::setw(6) << k << std::setw(25) << format_double(r.loss[k]) << std::setw(25)
        << format_double(r.grad_norm[k]);
    if (k > 0) out << std::setw(10) << format_double(r.step_size[k - 1]) << r.cg_iterations[k - 1];
    out << '\n';
  }
  out << std::right << "loss " << format_double(r.loss.front()) << " -> " << format_double(r.loss.back())
      << " (" << format_double(improvement_percent(r.loss.front(), r.loss.back())) << "% lower); "
      << r.excluded_scenarios << " scenarios excluded, " << r.degeneracy_warnings << " degeneracy warnings\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string case_path, scenarios, labels, out;
  std::vector<std::string> params;
  std::vector<std::string> baselines;
  std::size_t skip = 0;
  std::size_t limit = std::numeric_limits<std::size_t>::max();
};

struct NamedSet {
  std::string name;
  DcParams params;
  bool baseline = false;
};

std::ofstream open_csv(const fs::path& path, std::string_view header) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::FileNotFound, "cannot write " + path.string());
  f << header << '\n';
  return f;
}

int cmd_eval(const EvalArgs& a, RunManifest m, std::ostream& out) {
  const auto net = load_network(a.case_path);
  const auto sc_all = read_scenarios(a.scenarios);
  const auto labels_all = read_labels(a.labels);
  check_scenarios(net, sc_all);
  check_labels(net, labels_all);
  validate_labels(labels_all, sc_all);
  const auto [sc, labels] = select(sc_all, labels_all, a.skip, a.limit);
  if (sc.scenarios.empty()) throw Error(Errc::EmptyEvaluation, "no scenarios selected for evaluation");
  m.inputs = {a.case_path, a.scenarios, a.labels};

  std::vector<NamedSet> sets;
  std::set<std::string> names;
  auto add = [&](NamedSet s) {
    if (!names.insert(s.name).second) throw Error(Errc::InvalidConfig, "parameter set '" + s.name + "' given twice");
    sets.push_back(std::move(s));
  };
  std::vector<std::string> baselines = a.baselines;
  if (baselines.empty()) baselines = {"cold"};
  for (const auto& b : baselines) {
    if (b == "cold") add({"cold", cold_start(net), true});
    else if (b == "hot") add({"hot", hot_start(net, nominal_state(net), Demand{net.nominal_pd(), net.nominal_qd()}), true});
    else throw Error(Errc::InvalidConfig, "unknown baseline '" + b + "' (cold, hot)");
  }
  for (const auto& entry : a.params) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(Errc::InvalidConfig, "--params expects NAME=PATH, got '" + entry + "'");
    const std::string path = entry.substr(eq + 1);
    add({entry.substr(0, eq), read_params(path, net), false});
    m.inputs.push_back(path);
  }

  const auto set = make_training_set(net, sc, labels);
  RunReport report;
  report.case_id = net.name;
  std::vector<LossEvaluation> evals;
  for (const auto& s : sets) {
    evals.push_back(evaluate_loss(net, set, s.params, false));
    report.metrics.push_back(make_metrics(net, set, evals.back(), s.name));
  }

  const fs::path dir = a.out;
  fs::create_directories(dir);
  const fs::path report_path = dir / "eval_report.txt";
  write_report(report_path, report);
  if (!(read_report(report_path) == report)) throw Error(Errc::MalformedRow, "report did not read back identically");

  const fs::path metrics_csv = dir / "metrics.csv", errors_csv = dir / "errors.csv",
                 setpoints_csv = dir / "setpoints.csv", params_csv = dir / "params.csv",
                 improvement_csv = dir / "improvement.csv", summary_txt = dir / "summary.txt";
  {
    auto f = open_csv(metrics_csv, "set,scenarios,generators,excluded,mse,max_error");
    for (const auto& mt : report.metrics)
      f << mt.name << ',' << mt.scenario_count << ',' << mt.generator_count << ',' << set.excluded << ','
        << format_double(mt.mse) << ',' << format_double(mt.max_error) << '\n';
  }
  {
    auto f = open_csv(errors_csv, "set,scenario,sq_error,max_error");
    for (const auto& mt : report.metrics)
      for (std::size_t k = 0; k < mt.scenario_ids.size(); ++k)
        f << mt.name << ',' << mt.scenario_ids[k] << ',' << format_double(mt.scenario_sq_error[k]) << ','
          << format_double(mt.scenario_max_error[k]) << '\n';
  }
  {
    auto f = open_csv(setpoints_csv, "set,scenario,generator,bus,pg_dc,pg_ac");
    for (std::size_t s = 0; s < sets.size(); ++s)
      for (std::size_t k = 0; k < set.size(); ++k)
        for (std::size_t g = 0; g < net.num_generators(); ++g) {
          const auto gi = static_cast<Eigen::Index>(g);
          f << sets[s].name << ',' << set.ids[k] << ',' << g << ',' << net.bus_ids[net.generators[g].bus] << ','
            << format_double(evals[s].dispatch[k][gi]) << ',' << format_double(set.target[k][gi]) << '\n';
        }
  }
  {
    auto f = open_csv(params_csv, "set,family,index,element,value");
    for (const auto& s : sets) {
      for (std::size_t e = 0; e < net.num_branches(); ++e) {
        const auto& br = net.branches[e];
        const std::string elem = std::to_string(net.bus_ids[br.from]) + "-" + std::to_string(net.bus_ids[br.to]);
        f << s.name << ",b," << e << ',' << elem << ',' << format_double(s.params.b[static_cast<Eigen::Index>(e)]) << '\n';
        f << s.name << ",rho," << e << ',' << elem << ',' << format_double(s.params.rho[static_cast<Eigen::Index>(e)])
          << '\n';
      }
      for (std::size_t i = 0; i < net.num_buses(); ++i)
        f << s.name << ",gamma," << i << ',' << net.bus_ids[i] << ','
          << format_double(s.params.gamma[static_cast<Eigen::Index>(i)]) << '\n';
    }
  }
  std::ostringstream table;
  table << "case " << net.name << ": " << set.size() << " scenarios evaluated, " << set.excluded
        << " excluded (non-optimal labels)\n";
  table << std::left << std::setw(16) << "set" << std::setw(24) << "mse (p.u.^2)" << "max error (p.u.)\n";
  for (const auto& mt : report.metrics)
    table << std::setw(16) << mt.name << std::setw(24) << format_double(mt.mse) << format_double(mt.max_error) << '\n';
  {
    auto f = open_csv(improvement_csv, "set,baseline,mse_improvement_pct,max_improvement_pct");
    bool header = false;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (sets[s].baseline) continue;
      for (std::size_t b = 0; b < sets.size(); ++b) {
        if (!sets[b].baseline) continue;
        const double dm = improvement_percent(report.metrics[b].mse, report.metrics[s].mse);
        const double dx = improvement_percent(report.metrics[b].max_error, report.metrics[s].max_error);
        f << sets[s].name << ',' << sets[b].name << ',' << format_double(dm) << ',' << format_double(dx) << '\n';
        if (!header) {
          table << "improvement (%)\n";
          header = true;
        }
        table << "  " << std::setw(14) << sets[s].name << "vs " << std::setw(8) << sets[b].name << "mse "
              << std::fixed << std::setprecision(2) << dm << ", max " << dx << '\n'
              << std::defaultfloat << std::setprecision(6);
      }
    }
  }
  {
    std::ofstream f(summary_txt);
    if (!f) throw Error(Errc::FileNotFound, "cannot write " + summary_txt.string());
    f << table.str();
  }
  out << table.str();

  m.case_id = net.name;
  nlohmann::json cfg{{"skip", a.skip}, {"limit", a.limit}, {"baselines", baselines}};
  for (const auto& s : sets) cfg["sets"].push_back(s.name);
  m.config_hash = config_hash(cfg);
  m.outputs = {report_path, metrics_csv, errors_csv, setpoints_csv, params_csv, improvement_csv, summary_txt};
  m.finished_utc = utc_now();
  write_manifest(dir / "eval.manifest.json", m);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DC-OPF parameter tuning against AC-OPF dispatch labels"};
  app.name("dcopt");
  app.require_subcommand(1);
  app.set_version_flag("--version", DCOPT_VERSION);

  ScenariosArgs sa;
  auto* scen = app.add_subcommand("scenarios", "Sample load scenarios around the nominal case");
  scen->add_option("--case", sa.case_path, "MATPOWER case file")->required();
  scen->add_option("-n,--count", sa.count, "Number of scenarios")->capture_default_str();
  scen->add_option("--sigma", sa.sigma, "Std. deviation of the load factor")->capture_default_str();
  scen->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  scen->add_option("--config", sa.config, "Train config supplying count (train+test), sigma and seed");
  scen->add_option("-o,--out", sa.out, "Scenario file to write")->required();

  LabelArgs la;
  auto* lab = app.add_subcommand("label", "Solve AC-OPF per scenario, or import labels");
  lab->add_option("--case", la.case_path, "MATPOWER case file")->required();
  lab->add_option("--scenarios", la.scenarios, "Scenario file")->required();
  lab->add_option("--import", la.import, "Validate and copy an external label file instead of solving");
  lab->add_option("--tol", la.tol, "AC-OPF tolerance")->capture_default_str();
  lab->add_option("--max-iter", la.max_iter, "AC-OPF iteration limit")->capture_default_str();
  lab->add_option("-o,--out", la.out, "Label file to write")->required();

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Fit DC-OPF parameters to AC-OPF labels");
  trn->add_option("--case", ta.case_path, "MATPOWER case file")->required();
  trn->add_option("--scenarios", ta.scenarios, "Scenario file; the first train_count records are used")->required();
  trn->add_option("--labels", ta.labels, "Label file")->required();
  trn->add_option("--config", ta.config, "Train config (JSON)");
  trn->add_option("-o,--out", ta.out, "Output directory")->required();

  EvalArgs ea;
  auto* evl = app.add_subcommand("eval", "Compare parameter sets on labelled scenarios");
  evl->add_option("--case", ea.case_path, "MATPOWER case file")->required();
  evl->add_option("--scenarios", ea.scenarios, "Scenario file")->required();
  evl->add_option("--labels", ea.labels, "Label file")->required();
  evl->add_option("--params", ea.params, "Parameter set NAME=PATH (repeatable)");
  evl->add_option("--baseline", ea.baselines, "Baselines computed on demand: cold, hot (default cold)");
  evl->add_option("--skip", ea.skip, "Skip this many leading scenario records")->capture_default_str();
  evl->add_option("--limit", ea.limit, "Evaluate at most this many records");
  evl->add_option("-o,--out", ea.out, "Output directory")->required();

  std::vector<const char*> argv{"dcopt"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  RunManifest m;
  m.arguments = args;
  m.started_utc = utc_now();
  try {
    if (scen->parsed()) {
      m.command = "scenarios";
      m.case_path = sa.case_path;
      return cmd_scenarios(sa, *scen, m, out);
    }
    if (lab->parsed()) {
      m.command = "label";
      m.case_path = la.case_path;
      return cmd_label(la, m, out);
    }
    if (trn->parsed()) {
      m.command = "train";
      m.case_path = ta.case_path;
      return cmd_train(ta, m, out);
    }
    m.command = "eval";
    m.case_path = ea.case_path;
    return cmd_eval(ea, m, out);
  } catch (const Error& e) {
    err << "dcopt: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "dcopt: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace dcopt::cli
