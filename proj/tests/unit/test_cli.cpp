#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "dcopt/caseio.hpp"
#include "dcopt/error.hpp"
#include "dcopt/train.hpp"
#include "fixtures.hpp"

using namespace dcopt;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run dcopt_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

const std::string kCase = fixtures::case_path("pglib_opf_case14_ieee.m");

/// scenarios -> label -> train -> eval in `dir`; returns the eval output directory.
fs::path pipeline(const fs::path& dir) {
  const auto p = [&](const char* n) { return (dir / n).string(); };
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"train_count": 10, "test_count": 20, "seed": 3, "init": "both"})";
  }
  REQUIRE(dcopt_run({"scenarios", "--case", kCase, "--config", p("cfg.json"), "-o", p("sc.txt")}).code == 0);
  REQUIRE(dcopt_run({"label", "--case", kCase, "--scenarios", p("sc.txt"), "-o", p("lab.txt")}).code == 0);
  const auto tr = dcopt_run({"train", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("lab.txt"),
                             "--config", p("cfg.json"), "-o", p("tr")});
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  const auto ev = dcopt_run({"eval", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("lab.txt"),
                             "--skip", "10", "--baseline", "cold", "--baseline", "hot", "--params",
                             "trained=" + p("tr/params.txt"), "-o", p("ev")});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  return dir / "ev";
}

}  // namespace

TEST_CASE("cli: usage errors and help") {
  CHECK(dcopt_run({"--help"}).code == 0);
  CHECK(dcopt_run({"--version"}).code == 0);
  CHECK(dcopt_run({}).code == cli::kUsage);
  CHECK(dcopt_run({"scenarios", "--case", kCase}).code == cli::kUsage);  // missing --out
  CHECK(dcopt_run({"scenarios", "--case", kCase, "-o", "x", "--count", "many"}).code == cli::kUsage);
  CHECK(dcopt_run({"train", "--bogus"}).code == cli::kUsage);
}

TEST_CASE("cli: content hash") {
  CHECK(cli::sha256_tag("abc") == "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("cli: error codes are distinct per kind") {
  fixtures::TempDir tmp("cli_codes");
  CHECK(cli::exit_code(Errc::FileNotFound) != cli::exit_code(Errc::EmptyEvaluation));
  CHECK(cli::exit_code(Errc::FileNotFound) >= cli::kErrorBase);
  const auto r = dcopt_run({"scenarios", "--case", (tmp / "missing.m").string(), "-o", (tmp / "s").string()});
  CHECK(r.code == cli::exit_code(Errc::FileNotFound));
  CHECK(r.err.find("missing.m") != std::string::npos);
  CHECK(dcopt_run({"scenarios", "--case", kCase, "--sigma", "-1", "-o", (tmp / "s").string()}).code ==
        cli::exit_code(Errc::InvalidConfig));
}

TEST_CASE("cli: pipeline outputs, manifests and exact recomputation") {
  fixtures::TempDir tmp("cli_pipe");
  const auto ev = pipeline(tmp.path());

  for (const char* m : {"sc.txt.manifest.json", "lab.txt.manifest.json", "tr/train.manifest.json",
                        "ev/eval.manifest.json"}) {
    CAPTURE(m);
    const auto j = nlohmann::json::parse(slurp(tmp / m));
    for (const char* key : {"command", "case", "config_hash", "seed", "started_utc", "finished_utc", "outputs",
                            "version"})
      CHECK(j.contains(key));
    for (const auto& o : j["outputs"]) CHECK(o["hash"] == cli::sha256_tag(slurp(o["path"].get<std::string>())));
  }
  CHECK(nlohmann::json::parse(slurp(tmp / "sc.txt.manifest.json"))["seed"] == 3);

  // mse recomputes bit-exactly from errors.csv; improvements from metrics.csv.
  const auto metrics = read_csv(ev / "metrics.csv");
  const auto errors = read_csv(ev / "errors.csv");
  REQUIRE(metrics.size() == 3);
  std::map<std::string, double> mse;
  for (const auto& row : metrics) {
    const std::string& set = row[0];
    const double scenarios = std::stod(row[1]), gens = std::stod(row[2]);
    double sum = 0.0, max = 0.0;
    std::size_t n = 0;
    for (const auto& e : errors)
      if (e[0] == set) {
        sum += std::strtod(e[2].c_str(), nullptr);
        max = std::max(max, std::strtod(e[3].c_str(), nullptr));
        ++n;
      }
    CHECK(n == 20);
    CHECK(sum / (scenarios * gens) == std::strtod(row[4].c_str(), nullptr));
    CHECK(max == std::strtod(row[5].c_str(), nullptr));
    mse[set] = std::strtod(row[4].c_str(), nullptr);
  }
  const auto improvement = read_csv(ev / "improvement.csv");
  REQUIRE(improvement.size() == 2);
  for (const auto& row : improvement) {
    const double base = mse.at(row[1]);
    CHECK(100.0 * (base - mse.at(row[0])) / base == std::strtod(row[2].c_str(), nullptr));
  }
  CHECK(mse.at("trained") < mse.at("cold"));

  // Setpoint scatter: one row per set, scenario and machine.
  CHECK(read_csv(ev / "setpoints.csv").size() == 3 * 20 * 5);
  CHECK(read_report(ev / "eval_report.txt").metrics.size() == 3);
}

TEST_CASE("cli: outputs are reproducible byte for byte") {
  fixtures::TempDir a("cli_rep_a"), b("cli_rep_b");
  pipeline(a.path());
  pipeline(b.path());
  for (const char* f : {"sc.txt", "lab.txt", "tr/params.txt", "ev/metrics.csv", "ev/errors.csv", "ev/setpoints.csv",
                        "ev/params.csv", "ev/improvement.csv", "ev/summary.txt", "ev/eval_report.txt"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  // Training reports differ only in wall time.
  auto ra = read_report(a / "tr/train_report.txt"), rb = read_report(b / "tr/train_report.txt");
  REQUIRE(ra.training);
  ra.training->wall_time_s = rb.training->wall_time_s = 0.0;
  CHECK(ra == rb);
}

TEST_CASE("cli: label import and cross-reference checks") {
  fixtures::TempDir tmp("cli_import");
  const auto p = [&](const char* n) { return (tmp / n).string(); };
  REQUIRE(dcopt_run({"scenarios", "--case", kCase, "-n", "4", "-o", p("sc.txt")}).code == 0);
  REQUIRE(dcopt_run({"label", "--case", kCase, "--scenarios", p("sc.txt"), "-o", p("lab.txt")}).code == 0);
  CHECK(dcopt_run({"label", "--case", kCase, "--scenarios", p("sc.txt"), "--import", p("lab.txt"), "-o",
                   p("copy.txt")})
            .code == 0);
  CHECK(slurp(tmp / "copy.txt") == slurp(tmp / "lab.txt"));

  auto labels = read_labels(tmp / "lab.txt");
  labels.case_id = "case30";
  write_labels(tmp / "wrong.txt", labels);
  CHECK(dcopt_run({"label", "--case", kCase, "--scenarios", p("sc.txt"), "--import", p("wrong.txt"), "-o",
                   p("x.txt")})
            .code == cli::exit_code(Errc::CrossReferenceError));

  // Scenarios for another case.
  const auto other = fixtures::case_path("case9.m");
  REQUIRE(dcopt_run({"scenarios", "--case", other, "-n", "2", "-o", p("sc9.txt")}).code == 0);
  CHECK(dcopt_run({"label", "--case", kCase, "--scenarios", p("sc9.txt"), "-o", p("y.txt")}).code ==
        cli::exit_code(Errc::CrossReferenceError));

  CHECK(dcopt_run({"eval", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("lab.txt"), "--skip", "4",
                   "-o", p("ev")})
            .code == cli::exit_code(Errc::EmptyEvaluation));
  CHECK(dcopt_run({"eval", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("lab.txt"), "--params",
                   "noequals", "-o", p("ev")})
            .code == cli::exit_code(Errc::InvalidConfig));
}

TEST_CASE("cli: label exits nonzero when most labels fail") {
  fixtures::TempDir tmp("cli_fail");
  const auto p = [&](const char* n) { return (tmp / n).string(); };
  const auto net = load_network(kCase);
  auto sc = generate_scenarios(net, 3, 0.0, 1);
  sc.scenarios[1].pd *= 50.0;  // far beyond installed capacity
  sc.scenarios[2].pd *= 50.0;
  write_scenarios(tmp / "sc.txt", sc);
  const auto r = dcopt_run({"label", "--case", kCase, "--scenarios", p("sc.txt"), "--max-iter", "60", "-o", p("l")});
  CHECK(r.code == cli::kLabelFailures);
  const auto labels = read_labels(tmp / "l");
  CHECK(labels.labels[0].status == LabelStatus::Optimal);
  CHECK(labels.labels[1].status != LabelStatus::Optimal);

  // One failure in three is tolerated.
  sc.scenarios[2].pd = sc.scenarios[0].pd;
  write_scenarios(tmp / "sc.txt", sc);
  CHECK(dcopt_run({"label", "--case", kCase, "--scenarios", p("sc.txt"), "--max-iter", "60", "-o", p("l")}).code ==
        0);
}

TEST_CASE("cli: parameters that generated the labels score zero") {
  fixtures::TempDir tmp("cli_zero");
  const auto p = [&](const char* n) { return (tmp / n).string(); };
  const auto net = load_network(kCase);
  const auto sc = generate_scenarios(net, 5, 0.1, 7);
  write_scenarios(tmp / "sc.txt", sc);
  const auto params = cold_start(net);
  write_params(tmp / "own.txt", net, params, "own");

  LabelFile labels;
  labels.case_id = sc.case_id;
  labels.num_generators = net.num_generators();
  labels.num_buses = net.num_buses();
  for (const auto& s : sc.scenarios) {
    const auto dc = solve_dcopf(net, params, s.pd);
    labels.labels.push_back({s.id, LabelStatus::Optimal, dc.objective, dc.pg, Vector::Ones(net.num_buses()),
                             Vector::Zero(net.num_buses())});
  }
  write_labels(tmp / "lab.txt", labels);

  const auto ev = dcopt_run({"eval", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("lab.txt"),
                             "--params", "own=" + p("own.txt"), "-o", p("ev")});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  bool found = false;
  for (const auto& row : read_csv(tmp / "ev" / "metrics.csv")) {
    if (row[0] != "own") continue;
    found = true;
    CHECK(std::stod(row[4]) <= 1e-14);
    CHECK(std::stod(row[5]) <= 1e-6);
  }
  CHECK(found);
}

TEST_CASE("cli: train edge cases") {
  fixtures::TempDir tmp("cli_train");
  const auto p = [&](const char* n) { return (tmp / n).string(); };
  {
    std::ofstream cfg(tmp / "cfg.json");
    cfg << R"({"train_count": 3, "test_count": 1, "max_iter": 0})";
  }
  REQUIRE(dcopt_run({"scenarios", "--case", kCase, "-n", "4", "-o", p("sc.txt")}).code == 0);
  REQUIRE(dcopt_run({"label", "--case", kCase, "--scenarios", p("sc.txt"), "-o", p("lab.txt")}).code == 0);

  // No iterations: the output is the initialization.
  const auto tr = dcopt_run({"train", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("lab.txt"),
                             "--config", p("cfg.json"), "-o", p("tr")});
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  const auto net = load_network(kCase);
  CHECK(read_params(tmp / "tr" / "params.txt", net) == cold_start(net));

  // A scenario without a label.
  auto labels = read_labels(tmp / "lab.txt");
  labels.labels.pop_back();
  write_labels(tmp / "short.txt", labels);
  const auto bad = dcopt_run({"train", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("short.txt"),
                              "--config", p("cfg.json"), "-o", p("tr2")});
  CHECK(bad.code == cli::exit_code(Errc::CrossReferenceError));
  CHECK(!fs::exists(tmp / "tr2" / "params.txt"));
}

TEST_CASE("cli: evaluating an empty scenario file") {
  fixtures::TempDir tmp("cli_empty");
  const auto p = [&](const char* n) { return (tmp / n).string(); };
  const auto net = load_network(kCase);
  ScenarioFile sc;
  sc.case_id = net.name;
  sc.num_buses = net.num_buses();
  write_scenarios(tmp / "sc.txt", sc);
  LabelFile labels;
  labels.case_id = net.name;
  labels.num_generators = net.num_generators();
  labels.num_buses = net.num_buses();
  write_labels(tmp / "lab.txt", labels);
  CHECK(dcopt_run({"eval", "--case", kCase, "--scenarios", p("sc.txt"), "--labels", p("lab.txt"), "-o", p("ev")})
            .code == cli::exit_code(Errc::EmptyEvaluation));
}

TEST_CASE("cli: two-bus case labels every scenario optimal") {
  fixtures::TempDir tmp("cli_two_bus");
  const auto p = [&](const char* n) { return (tmp / n).string(); };
  {
    std::ofstream m(tmp / "case2.m");
    m << R"(function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	100	1	1.1	0.9;
	2	1	100	20	0	0	1	1	0	100	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	300	-300	1	100	1	250	0;
];
mpc.branch = [
	1	2	0.01	0.1	0	250	250	250	0	0	1	-360	360;
];
mpc.gencost = [
	2	0	0	3	0.01	10	0;
];
)";
  }
  REQUIRE(dcopt_run({"scenarios", "--case", p("case2.m"), "-n", "5", "-o", p("sc.txt")}).code == 0);
  const auto r = dcopt_run({"label", "--case", p("case2.m"), "--scenarios", p("sc.txt"), "-o", p("lab.txt")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto labels = read_labels(tmp / "lab.txt");
  REQUIRE(labels.labels.size() == 5);
  const auto sc = read_scenarios(tmp / "sc.txt");
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(labels.labels[k].status == LabelStatus::Optimal);
    // The single machine covers the load plus a small positive loss.
    CHECK(labels.labels[k].pg[0] > sc.scenarios[k].pd[1]);
    CHECK(labels.labels[k].pg[0] < 1.05 * sc.scenarios[k].pd[1]);
  }
}
