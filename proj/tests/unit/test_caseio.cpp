#include <doctest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "dcopt/caseio.hpp"
#include "dcopt/error.hpp"
#include "fixtures.hpp"

using namespace dcopt;

namespace {

const char* kTwoBus = R"(function mpc = tiny
% two buses, one line
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0  0 0 1 1 0 230 1 1.1 0.9;
  2 1 100 20 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 300 -300 1 100 1 250 10;
];
mpc.branch = [
  1 2 0.01 0.1 0.02 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [
  2 0 0 3 0.02 20 5;
];
)";

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected dcopt::Error");
  return Errc::InvalidConfig;
}

}  // namespace

TEST_CASE("parse_matpower reads the pglib 14-bus case") {
  const auto raw = read_matpower(fixtures::case_path("pglib_opf_case14_ieee.m"));
  CHECK(raw.name == "pglib_opf_case14_ieee");
  CHECK(raw.base_mva == 100.0);
  CHECK(raw.bus.size() == 14);
  CHECK(raw.gen.size() == 5);
  CHECK(raw.branch.size() == 20);
  CHECK(raw.gencost.size() == 5);
  CHECK(raw.gen.front().size() == 10);
}

TEST_CASE("parse_matpower on a minimal inline case") {
  const auto raw = parse_matpower(kTwoBus);
  CHECK(raw.name == "tiny");
  CHECK(raw.bus.size() == 2);
  CHECK(raw.branch.size() == 1);
  CHECK(raw.branch[0].size() == 13);
  CHECK(raw.gencost[0][4] == 0.02);
}

TEST_CASE("parse_matpower error cases") {
  SUBCASE("missing gencost") {
    const std::string text = std::regex_replace(std::string(kTwoBus), std::regex("mpc\\.gencost"), "mpc.other");
    CHECK(code_of([&] { parse_matpower(text); }) == Errc::MissingTable);
  }
  SUBCASE("non-numeric entry") {
    std::string text = kTwoBus;
    text.replace(text.find("0.01 0.1"), 4, "abc ");
    CHECK(code_of([&] { parse_matpower(text); }) == Errc::MalformedRow);
  }
  SUBCASE("ragged row") {
    std::string text = kTwoBus;
    text.replace(text.find("1.1 0.9;\n  2"), 8, "1.1;    ");
    CHECK(code_of([&] { parse_matpower(text); }) == Errc::MalformedRow);
  }
  SUBCASE("too few columns") {
    std::string text = kTwoBus;
    const std::string row = "1 2 0.01 0.1 0.02 0 0 0 0 0 1 -360 360;";
    text.replace(text.find(row), row.size(), "1 2 0.01 0.1 0.02 0 0 0 0;");
    CHECK(code_of([&] { parse_matpower(text); }) == Errc::MalformedRow);
  }
  SUBCASE("duplicate bus id") {
    std::string text = kTwoBus;
    text.replace(text.find("  2 1 100"), 9, "  1 1 100");
    CHECK(code_of([&] { parse_matpower(text); }) == Errc::DuplicateBusId);
  }
  SUBCASE("branch to unknown bus") {
    std::string text = kTwoBus;
    text.replace(text.find("  1 2 0.01"), 10, "  1 7 0.01");
    CHECK(code_of([&] { parse_matpower(text); }) == Errc::UnknownBus);
  }
  SUBCASE("nonpositive base") {
    std::string text = kTwoBus;
    text.replace(text.find("= 100;"), 6, "= 0;  ");
    CHECK(code_of([&] { parse_matpower(text); }) == Errc::InvalidCase);
  }
  SUBCASE("missing file") {
    CHECK(code_of([] { read_matpower("/nonexistent/case.m"); }) == Errc::FileNotFound);
  }
}

TEST_CASE("parse_matpower tolerates comments, Inf and cell arrays") {
  std::string text = kTwoBus;
  text.replace(text.find("300 -300"), 8, "Inf -Inf");
  text += "mpc.bus_name = {\n 'one [x]';\n 'two % not a comment';\n};\n";
  text += "% mpc.bus = [ 9 9 9 ];\n";
  const auto raw = parse_matpower(text);
  CHECK(std::isinf(raw.gen[0][3]));
  CHECK(raw.gen[0][4] < 0);
  CHECK(raw.bus.size() == 2);
}

TEST_CASE("to_network converts to per unit") {
  const auto net = to_network(parse_matpower(kTwoBus));
  REQUIRE(net.num_buses() == 2);
  CHECK(net.buses[1].pd == doctest::Approx(1.0));
  CHECK(net.buses[1].qd == doctest::Approx(0.2));
  const auto& g = net.generators.at(0);
  CHECK(g.pmax == doctest::Approx(2.5));
  CHECK(g.pmin == doctest::Approx(0.1));
  CHECK(g.c2 == doctest::Approx(0.02 * 100 * 100));
  CHECK(g.c1 == doctest::Approx(20 * 100));
  CHECK(g.c0 == 5.0);
  const auto& br = net.branches.at(0);
  CHECK(br.rating == 100.0);  // rateA = 0
  CHECK(br.tap == 1.0);       // ratio = 0
  CHECK(std::isinf(br.angmin));
  CHECK(std::isinf(br.angmax));
  CHECK(net.reference == 0);
}

TEST_CASE("to_network honours a configured sentinel and drops out-of-service elements") {
  std::string text = kTwoBus;
  const std::string gen_row = "  1 0 0 300 -300 1 100 1 250 10;\n";
  text.insert(text.find(gen_row) + gen_row.size(), "  2 0 0 5 -5 1 100 0 50 0;\n");
  const std::string cost_row = "  2 0 0 3 0.02 20 5;\n";
  text.insert(text.find(cost_row) + cost_row.size(), "  2 0 0 3 0 1 0;\n");
  const auto raw = parse_matpower(text);
  REQUIRE(raw.gen.size() == 2);
  const auto net = to_network(raw, NetworkOptions{.unlimited_rating = 42.0});
  CHECK(net.num_generators() == 1);
  CHECK(net.branches[0].rating == 42.0);
}

TEST_CASE("to_network rejects unsupported or invalid networks") {
  SUBCASE("piecewise-linear cost") {
    std::string text = kTwoBus;
    text.replace(text.find("2 0 0 3 0.02 20 5"), 17, "1 0 0 2 0 0 100 2000");
    CHECK(code_of([&] { to_network(parse_matpower(text)); }) == Errc::UnsupportedCostModel);
  }
  SUBCASE("cubic cost") {
    std::string text = kTwoBus;
    text.replace(text.find("2 0 0 3 0.02 20 5"), 17, "2 0 0 4 1 0.02 20 5");
    CHECK(code_of([&] { to_network(parse_matpower(text)); }) == Errc::UnsupportedCostModel);
  }
  SUBCASE("no reference bus") {
    std::string text = kTwoBus;
    text.replace(text.find("  1 3 0"), 7, "  1 2 0");
    CHECK(code_of([&] { to_network(parse_matpower(text)); }) == Errc::NoReferenceBus);
  }
  SUBCASE("islanded once the only branch is out of service") {
    std::string text = kTwoBus;
    text.replace(text.find("0 0 0 0 0 1 -360"), 16, "0 0 0 0 0 0 -360");
    CHECK(code_of([&] { to_network(parse_matpower(text)); }) == Errc::IslandedNetwork);
  }
}

TEST_CASE("to_network keeps quantities recoverable in MW") {
  const auto raw = read_matpower(fixtures::case_path("case57.m"));
  const auto net = to_network(raw);
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const double mw = net.buses[i].pd * net.base_mva;
    const double ref = raw.bus[i][2];
    CHECK(std::abs(mw - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
  }
  std::size_t g = 0;
  for (const auto& row : raw.gen) {
    if (row[7] <= 0) continue;
    const auto& gen = net.generators[g++];
    CHECK(std::abs(gen.pmax * net.base_mva - row[8]) <= 1e-12 * std::max(1.0, row[8]));
  }
}

TEST_CASE("every shipped case parses with the expected counts") {
  struct Expect {
    const char* file;
    std::size_t bus, gen, branch, gen_in_service, ref_id;
  };
  const Expect cases[] = {
      {"pglib_opf_case14_ieee.m", 14, 5, 20, 5, 1},
      {"case9.m", 9, 3, 9, 3, 1},
      {"case14.m", 14, 5, 20, 5, 1},
      {"case39.m", 39, 10, 46, 10, 31},
      {"case57.m", 57, 7, 80, 7, 1},
      {"case118.m", 118, 54, 186, 54, 69},
      {"case_ACTIVSg200.m", 200, 49, 245, 38, 189},
      {"case_ACTIVSg500.m", 500, 90, 597, 56, 17},
      {"case_ACTIVSg2000.m", 2000, 544, 3206, 432, 7098},
  };
  for (const auto& c : cases) {
    CAPTURE(c.file);
    const auto raw = read_matpower(fixtures::case_path(c.file));
    CHECK(raw.bus.size() == c.bus);
    CHECK(raw.gen.size() == c.gen);
    CHECK(raw.branch.size() == c.branch);
    const auto net = to_network(raw);
    CHECK(net.num_buses() == c.bus);
    CHECK(net.num_generators() == c.gen_in_service);
    CHECK(net.bus_ids[net.reference] == static_cast<int>(c.ref_id));
  }
}

TEST_CASE("14-bus network model") {
  const auto net = load_network(fixtures::case_path("pglib_opf_case14_ieee.m"));
  CHECK(net.num_buses() == 14);
  CHECK(net.num_branches() == 20);
  CHECK(net.bus_ids[net.reference] == 1);
  CHECK(net.generators[0].c2 == 0.0);
  CHECK(net.generators[0].c1 == doctest::Approx(792.0951));
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, -2.5e300, 123456789.123456789}) {
    double back = 0.0;
    std::istringstream(format_double(v)) >> back;
    CHECK(back == v);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("scenario files") {
  fixtures::TempDir dir("scen");
  ScenarioFile f;
  f.case_id = "case14";
  f.seed = 18446744073709551615ull;
  f.sigma = 0.15;
  f.num_buses = 3;
  for (int k = 0; k < 20; ++k) {
    Vector pd(3), qd(3);
    pd << 0.1 * k + 1.0 / 3.0, 0.0, std::exp(-k);
    qd << -pd[0] / 7.0, 0.0, pd[2] * 0.2;
    f.scenarios.push_back({k, pd, qd});
  }
  SUBCASE("round trip") {
    write_scenarios(dir / "s.txt", f);
    CHECK(read_scenarios(dir / "s.txt") == f);
  }
  SUBCASE("empty list") {
    f.scenarios.clear();
    write_scenarios(dir / "e.txt", f);
    const auto back = read_scenarios(dir / "e.txt");
    CHECK(back.scenarios.empty());
    CHECK(back == f);
  }
  SUBCASE("short vector on write") {
    f.scenarios[3].pd.conservativeResize(2);
    CHECK(code_of([&] { write_scenarios(dir / "bad.txt", f); }) == Errc::LengthMismatch);
  }
  SUBCASE("short vector on read") {
    write_scenarios(dir / "s.txt", f);
    std::string text = slurp((dir / "s.txt").string());
    const auto pos = text.find("pd ");
    const auto end = text.find('\n', pos);
    text.replace(pos, end - pos, "pd 1 2");
    std::ofstream(dir / "s.txt") << text;
    CHECK(code_of([&] { read_scenarios(dir / "s.txt"); }) == Errc::LengthMismatch);
  }
  SUBCASE("version mismatch") {
    write_scenarios(dir / "s.txt", f);
    std::string text = slurp((dir / "s.txt").string());
    text.replace(0, 11, "scenarios 9");
    std::ofstream(dir / "s.txt") << text;
    CHECK(code_of([&] { read_scenarios(dir / "s.txt"); }) == Errc::SchemaVersionMismatch);
  }
}

TEST_CASE("label files") {
  fixtures::TempDir dir("labels");
  ScenarioFile s;
  s.case_id = "c";
  s.num_buses = 2;
  for (int k = 0; k < 3; ++k) s.scenarios.push_back({k, Vector::Constant(2, 0.5 + k), Vector::Zero(2)});

  LabelFile l;
  l.case_id = "c";
  l.num_generators = 2;
  l.num_buses = 2;
  for (int k = 0; k < 3; ++k) {
    Label rec;
    rec.scenario_id = k;
    rec.status = k == 1 ? LabelStatus::Infeasible : LabelStatus::Optimal;
    rec.objective = 1234.5678 + k;
    rec.pg = Vector::Constant(2, 0.1 * k);
    rec.vm = Vector::Constant(2, 1.01);
    rec.va = Vector::Constant(2, -0.02 * k);
    l.labels.push_back(rec);
  }
  write_labels(dir / "l.txt", l);
  const auto back = read_labels(dir / "l.txt");
  CHECK(back == l);
  CHECK(back.find(1)->status == LabelStatus::Infeasible);
  CHECK(back.find(7) == nullptr);
  CHECK_NOTHROW(validate_labels(back, s));

  SUBCASE("unknown scenario id") {
    auto bad = l;
    bad.labels[2].scenario_id = 99;
    CHECK(code_of([&] { validate_labels(bad, s); }) == Errc::CrossReferenceError);
  }
  SUBCASE("missing scenario") {
    auto bad = l;
    bad.labels.pop_back();
    CHECK(code_of([&] { validate_labels(bad, s); }) == Errc::CrossReferenceError);
  }
  SUBCASE("wrong case") {
    auto bad = l;
    bad.case_id = "other";
    CHECK(code_of([&] { validate_labels(bad, s); }) == Errc::CrossReferenceError);
  }
}

TEST_CASE("parameter files") {
  fixtures::TempDir dir("params");
  const auto net = load_network(fixtures::case_path("pglib_opf_case14_ieee.m"));
  auto p = cold_start(net);
  for (Eigen::Index i = 0; i < p.gamma.size(); ++i) p.gamma[i] = 1e-3 * std::sin(1.0 + static_cast<double>(i));
  for (Eigen::Index e = 0; e < p.rho.size(); ++e) p.rho[e] = -1e-4 / (1.0 + static_cast<double>(e));
  write_params(dir / "p.txt", net, p, "trained");
  CHECK(read_params(dir / "p.txt", net) == p);

  const auto other = load_network(fixtures::case_path("case9.m"));
  CHECK(code_of([&] { read_params(dir / "p.txt", other); }) == Errc::LengthMismatch);
  auto wrong = p;
  wrong.gamma.conservativeResize(3);
  CHECK(code_of([&] { write_params(dir / "q.txt", net, wrong, "x"); }) == Errc::DimensionMismatch);
}

TEST_CASE("report files") {
  fixtures::TempDir dir("report");
  RunReport r;
  r.case_id = "pglib14";
  TrainReport t;
  t.init_mode = "cold";
  t.termination = "gradient tolerance reached";
  t.loss = {0.5, 0.25, 0.125};
  t.grad_norm = {1.0, 0.1, 1e-7};
  t.step_size = {1.0, 0.5};
  t.cg_iterations = {3, 4};
  t.degeneracy_warnings = 2;
  t.wall_time_s = 0.1234;
  t.final_params = DcParams{Vector::Ones(2), Vector::Zero(3), Vector::Constant(2, 1e-3)};
  r.training = t;
  Metrics m;
  m.name = "cold";
  m.scenario_count = 2;
  m.generator_count = 2;
  m.mse = 0.0125;
  m.max_error = 0.2;
  m.scenario_ids = {4, 9};
  m.scenario_sq_error = {0.01, 0.04};
  m.scenario_max_error = {0.1, 0.2};
  r.metrics.push_back(m);
  write_report(dir / "r.txt", r);
  CHECK(read_report(dir / "r.txt") == r);

  r.training.reset();
  write_report(dir / "r2.txt", r);
  CHECK(read_report(dir / "r2.txt") == r);

  Metrics empty;
  empty.name = "none";
  r.metrics.push_back(empty);
  CHECK(code_of([&] { write_report(dir / "r3.txt", r); }) == Errc::EmptyEvaluation);
}

TEST_CASE("improvement percent") {
  CHECK(improvement_percent(0.0070, 0.0030) == doctest::Approx(57.142857));
  CHECK(improvement_percent(0.0, 1.0) == 0.0);
}
