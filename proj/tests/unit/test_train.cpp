#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dcopt/acsolve.hpp"
#include "dcopt/caseio.hpp"
#include "dcopt/error.hpp"
#include "dcopt/parallel.hpp"
#include "dcopt/train.hpp"
#include "fixtures.hpp"

using namespace dcopt;
using doctest::Approx;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Labels equal to the DC dispatch at `params` plus a per-scenario offset.
LabelFile dc_labels(const NetworkModel& net, const ScenarioFile& sc, const DcParams& params,
                    const std::vector<Vector>& offsets = {}) {
  LabelFile lf;
  lf.case_id = sc.case_id;
  lf.num_generators = net.num_generators();
  lf.num_buses = net.num_buses();
  for (std::size_t k = 0; k < sc.scenarios.size(); ++k) {
    const auto sol = solve_dcopf(net, params, sc.scenarios[k].pd);
    Label l;
    l.scenario_id = sc.scenarios[k].id;
    l.status = LabelStatus::Optimal;
    l.objective = sol.objective;
    l.pg = sol.pg + (offsets.empty() ? Vector::Zero(sol.pg.size()) : offsets[k]);
    l.vm = Vector::Ones(static_cast<Eigen::Index>(net.num_buses()));
    l.va = sol.theta;
    lf.labels.push_back(l);
  }
  return lf;
}

LabelFile ac_labels(const NetworkModel& net, const ScenarioFile& sc) {
  LabelFile lf;
  lf.case_id = sc.case_id;
  lf.num_generators = net.num_generators();
  lf.num_buses = net.num_buses();
  lf.labels.resize(sc.scenarios.size());
  parallel_for(sc.scenarios.size(), [&](std::size_t k) {
    const auto sol = solve_acopf(net, sc.demand(k));
    auto& l = lf.labels[k];
    l.scenario_id = sc.scenarios[k].id;
    l.status = sol.status == AcOpfStatus::Optimal ? LabelStatus::Optimal : LabelStatus::Failed;
    l.objective = sol.objective;
    l.pg = sol.state.pg;
    l.vm = sol.state.vm;
    l.va = sol.state.va;
  });
  return lf;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenarios

TEST_CASE("generate_scenarios: sigma 0 reproduces nominal loads") {
  const auto net = fixtures::three_bus_congested();
  const auto sc = generate_scenarios(net, 5, 0.0, 3);
  REQUIRE(sc.scenarios.size() == 5);
  CHECK(sc.case_id == net.name);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(sc.scenarios[k].id == static_cast<int>(k + 1));
    CHECK(sc.scenarios[k].pd == net.nominal_pd());
    CHECK(sc.scenarios[k].qd == net.nominal_qd());
  }
}

TEST_CASE("generate_scenarios: factor statistics and power factor") {
  auto net = fixtures::two_bus();
  net.buses[1].qd = 0.37;
  const auto sc = generate_scenarios(net, 10000, 0.15, 42);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& s : sc.scenarios) {
    const double f = s.pd[1];
    sum += f;
    sum2 += f * f;
    CHECK(f > 0.0);
    CHECK(s.pd[0] == 0.0);
    CHECK(s.qd[0] == 0.0);
    // Same factor on both components: q/p equals the nominal ratio.
    CHECK(std::abs(s.qd[1] / s.pd[1] - 0.37) <= 1e-15);
  }
  const double mean = sum / 10000.0;
  const double sd = std::sqrt(sum2 / 10000.0 - mean * mean);
  CHECK(std::abs(mean - 1.0) <= 0.005);
  CHECK(std::abs(sd - 0.15) <= 0.005);
}

TEST_CASE("generate_scenarios: deterministic file bytes") {
  const auto net = load_network(fixtures::case_path("pglib_opf_case14_ieee.m"));
  fixtures::TempDir dir("scen");
  write_scenarios(dir / "a.txt", generate_scenarios(net, 50, 0.15, 9));
  write_scenarios(dir / "b.txt", generate_scenarios(net, 50, 0.15, 9));
  write_scenarios(dir / "c.txt", generate_scenarios(net, 50, 0.15, 10));
  CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));
  CHECK(slurp(dir / "a.txt") != slurp(dir / "c.txt"));
}

TEST_CASE("generate_scenarios: invalid arguments") {
  const auto net = fixtures::two_bus();
  CHECK_THROWS_AS(generate_scenarios(net, 0, 0.1, 1), Error);
  CHECK_THROWS_AS(generate_scenarios(net, 3, -0.1, 1), Error);
}

// ---------------------------------------------------------------------------
// Loss and gradient

TEST_CASE("loss: hand-evaluated values") {
  SUBCASE("labels equal to the DC dispatch") {
    const auto net = fixtures::three_bus_congested();
    const auto sc = generate_scenarios(net, 4, 0.1, 1);
    const auto labels = dc_labels(net, sc, cold_start(net));
    CHECK(loss(cold_start(net), sc, labels, net) == 0.0);
    CHECK((loss_gradient(cold_start(net), sc, labels, net).array() == 0.0).all());
  }
  SUBCASE("one machine, one scenario") {
    const auto net = fixtures::two_bus();
    const auto sc = generate_scenarios(net, 1, 0.0, 1);
    auto labels = dc_labels(net, sc, cold_start(net));
    labels.labels[0].pg[0] = 1.05;
    CHECK(loss(cold_start(net), sc, labels, net) == Approx(0.0025).epsilon(1e-9));
  }
  SUBCASE("two machines, two scenarios") {
    const auto net = fixtures::three_bus_congested();
    const auto sc = generate_scenarios(net, 2, 0.05, 1);
    const auto labels = dc_labels(net, sc, cold_start(net), {Vector{{-0.1, 0.0}}, Vector{{0.0, 0.2}}});
    CHECK(loss(cold_start(net), sc, labels, net) == Approx(0.0125).epsilon(1e-9));
    const auto m = evaluate(net, cold_start(net), sc, labels, "cold");
    CHECK(m.mse == Approx(0.0125).epsilon(1e-9));
    CHECK(m.max_error == Approx(0.2).epsilon(1e-9));
    CHECK(m.scenario_ids == std::vector<int>{1, 2});
    CHECK(m.scenario_sq_error[0] == Approx(0.01).epsilon(1e-9));
    CHECK(m.scenario_max_error[1] == Approx(0.2).epsilon(1e-9));
  }
}

TEST_CASE("loss_gradient: single machine without congestion") {
  const auto net = fixtures::two_bus();
  const auto sc = generate_scenarios(net, 3, 0.1, 5);
  const auto labels = dc_labels(net, sc, cold_start(net), {Vector{{0.02}}, Vector{{-0.05}}, Vector{{0.01}}});
  const Vector g = loss_gradient(cold_start(net), sc, labels, net);
  const auto gp = DcParams::unflatten(g, 1, 2);
  // pg - label = -offset; g_gamma_i = (2/|M|) sum_m (pg_m - label_m).
  const double expected = 2.0 / 3.0 * (-0.02 + 0.05 - 0.01);
  CHECK(gp.gamma[0] == Approx(expected).epsilon(1e-9));
  CHECK(gp.gamma[1] == Approx(expected).epsilon(1e-9));
  CHECK(std::abs(gp.b[0]) <= 1e-12);
  CHECK(std::abs(gp.rho[0]) <= 1e-12);
}

TEST_CASE("loss_gradient: 14-bus matches central differences") {
  const auto net = load_network(fixtures::case_path("pglib_opf_case14_ieee.m"));
  const auto sc = generate_scenarios(net, 6, 0.15, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  auto truth = cold_start(net);
  for (auto& v : truth.gamma) v = 0.3 * noise(rng);
  const auto labels = dc_labels(net, sc, truth);
  auto params = cold_start(net);
  for (auto& v : params.b) v *= 1.0 + noise(rng);
  for (auto& v : params.rho) v = 0.2 * noise(rng);

  const auto set = make_training_set(net, sc, labels);
  const Vector g = evaluate_loss(net, set, params, true).gradient;
  const Vector x0 = params.flatten();
  const double h = 1e-6;
  const double scale = g.cwiseAbs().maxCoeff();
  std::uniform_int_distribution<Eigen::Index> pick(0, x0.size() - 1);
  int compared = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const auto i = pick(rng);
    CAPTURE(i);
    Vector xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    const auto pp = DcParams::unflatten(xp, net.num_branches(), net.num_buses());
    const auto pm = DcParams::unflatten(xm, net.num_branches(), net.num_buses());
    const double fd = (evaluate_loss(net, set, pp, false).loss - evaluate_loss(net, set, pm, false).loss) / (2.0 * h);
    CHECK(std::abs(g[i] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3 * scale));
    ++compared;
  }
  CHECK(compared == 25);
}

TEST_CASE("evaluate_loss: worker count does not change results") {
  const auto net = load_network(fixtures::case_path("pglib_opf_case14_ieee.m"));
  const auto sc = generate_scenarios(net, 12, 0.15, 4);
  auto truth = cold_start(net);
  truth.gamma.setConstant(0.01);
  const auto set = make_training_set(net, sc, dc_labels(net, sc, truth));
  LossOptions one, many;
  one.workers = 1;
  many.workers = 4;
  const auto a = evaluate_loss(net, set, cold_start(net), true, one);
  const auto b = evaluate_loss(net, set, cold_start(net), true, many);
  CHECK(a.loss == b.loss);
  CHECK(a.gradient == b.gradient);
}

TEST_CASE("evaluate_loss: infeasible scenario is named") {
  const auto net = fixtures::two_bus();
  auto sc = generate_scenarios(net, 3, 0.0, 1);
  const auto labels = dc_labels(net, sc, cold_start(net));
  sc.scenarios[1].pd[1] = 5.0;
  const auto set = make_training_set(net, sc, labels);
  try {
    evaluate_loss(net, set, cold_start(net), false);
    FAIL("expected LowerLevelInfeasible");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LowerLevelInfeasible);
    CHECK(std::string(e.what()).find("scenario 2") != std::string::npos);
  }
}

TEST_CASE("make_training_set: non-optimal labels are excluded") {
  const auto net = fixtures::two_bus();
  const auto sc = generate_scenarios(net, 3, 0.1, 1);
  auto labels = dc_labels(net, sc, cold_start(net));
  labels.labels[1].status = LabelStatus::Infeasible;
  const auto set = make_training_set(net, sc, labels);
  CHECK(set.size() == 2);
  CHECK(set.excluded == 1);
  CHECK(set.ids == std::vector<int>{1, 3});
  for (auto& l : labels.labels) l.status = LabelStatus::Failed;
  CHECK_THROWS_WITH_AS(make_training_set(net, sc, labels), doctest::Contains("EmptyEvaluation"), Error);
  labels.case_id = "other";
  CHECK_THROWS_WITH_AS(make_training_set(net, sc, labels), doctest::Contains("CrossReferenceError"), Error);
}

// ---------------------------------------------------------------------------
// TNC

TEST_CASE("tnc_minimize: stationary start returns immediately") {
  int calls = 0;
  const Objective f = [&](const Vector& x, Vector& g) {
    ++calls;
    g = x;
    return 0.5 * x.squaredNorm();
  };
  const auto res = tnc_minimize(f, Vector::Zero(3));
  CHECK(res.report.iterations() == 0);
  CHECK(res.x == Vector::Zero(3));
  CHECK(res.report.termination == "converged");
  CHECK(calls == 1);
}

TEST_CASE("tnc_minimize: diag(1,10) quadratic") {
  const Vector d{{1.0, 10.0}};
  const Objective f = [&](const Vector& x, Vector& g) {
    g = d.cwiseProduct(x);
    return 0.5 * x.dot(g);
  };
  TncOptions o;
  o.tol = 1e-10;
  const auto res = tnc_minimize(f, Vector{{1.0, 1.0}}, o);
  CHECK(res.report.grad_norm.back() <= 1e-10);
  CHECK(res.report.iterations() <= 2);
  CHECK(res.x.norm() <= 1e-10);
}

TEST_CASE("tnc_minimize: Rosenbrock") {
  const Objective f = [](const Vector& x, Vector& g) {
    const double a = x[1] - x[0] * x[0];
    const double b = 1.0 - x[0];
    g.resize(2);
    g[0] = -400.0 * x[0] * a - 2.0 * b;
    g[1] = 200.0 * a;
    return 100.0 * a * a + b * b;
  };
  TncOptions o;
  o.tol = 1e-9;
  const auto res = tnc_minimize(f, Vector{{-1.2, 1.0}}, o);
  CHECK((res.x - Vector{{1.0, 1.0}}).norm() <= 1e-6);
  CHECK(non_increasing(res.report.loss));
}

TEST_CASE("tnc_minimize: random convex quadratics") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n : {2, 5, 10, 25, 50}) {
    CAPTURE(n);
    // Q = V diag(lambda) V^T with lambda spread over [1, 1e4].
    const Eigen::MatrixXd rnd = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return u(rng) - 0.5; });
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(rnd);
    const Eigen::MatrixXd v = qr.householderQ();
    Vector lambda(n);
    for (int i = 0; i < n; ++i) lambda[i] = std::pow(1e4, n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
    const Eigen::MatrixXd q = v * lambda.asDiagonal() * v.transpose();
    Vector xs(n);
    for (auto& x : xs) x = u(rng) - 0.5;
    // Centred form: the value carries no cancellation error near the minimum.
    const Objective f = [&](const Vector& x, Vector& g) {
      const Vector d = x - xs;
      g = q * d;
      return 0.5 * d.dot(g);
    };
    TncOptions o;
    o.tol = 1e-8;
    const auto res = tnc_minimize(f, Vector::Zero(n), o);
    CHECK(res.report.grad_norm.back() <= 1e-8);
    CHECK(res.report.iterations() <= static_cast<std::size_t>(n + 5));
    CHECK((res.x - xs).norm() <= 1e-8);
    CHECK(non_increasing(res.report.loss));
  }
}

TEST_CASE("tnc_minimize: steps shrink back into the domain") {
  // log barrier: f = x - log(x) has its minimum at 1 and no value for x <= 0.
  const Objective f = [](const Vector& x, Vector& g) {
    g.resize(1);
    if (x[0] <= 0.0) return std::numeric_limits<double>::infinity();
    g[0] = 1.0 - 1.0 / x[0];
    return x[0] - std::log(x[0]);
  };
  TncOptions o;
  o.tol = 1e-10;
  const auto res = tnc_minimize(f, Vector::Constant(1, 0.05), o);
  CHECK(res.x[0] == Approx(1.0).epsilon(1e-8));
  CHECK(non_increasing(res.report.loss));
}

TEST_CASE("tnc_minimize: diagonal preconditioner") {
  const Vector d{{1.0, 100.0, 1e4}};
  const Objective f = [&](const Vector& x, Vector& g) {
    g = d.cwiseProduct(x) - Vector::Ones(3);
    return 0.5 * x.dot(d.cwiseProduct(x)) - x.sum();
  };
  TncOptions o;
  o.tol = 1e-9;
  o.diagonal_preconditioner = true;
  const auto res = tnc_minimize(f, Vector::Zero(3), o);
  CHECK((res.x - d.cwiseInverse()).norm() <= 1e-8);
}

// ---------------------------------------------------------------------------
// Training

TEST_CASE("TrainConfig: validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.tnc.wolfe_c2 = 1e-5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("InvalidConfig"), Error);
  c = {};
  c.sigma = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.train_count = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(parse_init_mode("hot") == InitMode::Hot);
  CHECK_THROWS_AS(parse_init_mode("warm"), Error);
}

TEST_CASE("train: max_iter 0 keeps the initialization") {
  const auto net = fixtures::three_bus_congested();
  const auto sc = generate_scenarios(net, 3, 0.1, 1);
  const auto labels = dc_labels(net, sc, cold_start(net), {Vector{{0.1, 0.0}}, Vector{{0.0, 0.1}}, Vector{{0.05, 0.0}}});
  TrainConfig cfg;
  cfg.tnc.max_iter = 0;
  const auto res = train(net, sc, labels, cfg);
  CHECK(res.params == cold_start(net));
  CHECK(res.report.iterations() == 0);
  CHECK(res.report.loss.size() == 1);
  CHECK(res.report.init_mode == "cold");
  CHECK_THROWS_WITH_AS(train(net, sc, labels, [] {
                         TrainConfig c;
                         c.init = InitMode::Hot;
                         return c;
                       }()),
                       doctest::Contains("nominal"), Error);
}

TEST_CASE("train: recovers self-consistent labels") {
  const auto net = fixtures::three_bus_congested();
  const auto sc = generate_scenarios(net, 8, 0.15, 6);
  auto truth = cold_start(net);
  truth.gamma = Vector{{0.02, -0.01, 0.03}};
  truth.rho = Vector{{0.01, 0.0, -0.02}};
  const auto labels = dc_labels(net, sc, truth);
  TrainConfig cfg;
  cfg.tnc.tol = 1e-12;
  const auto res = train(net, sc, labels, cfg);
  CHECK(res.report.loss.front() > 1e-6);
  CHECK(res.report.loss.back() <= 1e-10);
  CHECK(non_increasing(res.report.loss));
}

TEST_CASE("train: warm start from given parameters") {
  const auto net = fixtures::three_bus_congested();
  const auto sc = generate_scenarios(net, 6, 0.15, 8);
  auto truth = cold_start(net);
  truth.gamma = Vector{{0.01, 0.02, -0.01}};
  const auto labels = dc_labels(net, sc, truth);
  TrainConfig cfg;
  cfg.tnc.tol = 1e-12;
  auto start = truth;
  start.b *= 1.1;
  start.gamma *= 0.9;
  const auto res = train(net, sc, labels, cfg, start);
  CHECK(res.report.init_mode == "given");
  CHECK(res.report.loss.back() <= 1e-10);
  CHECK(non_increasing(res.report.loss));

  cfg.tnc.max_iter = 0;
  CHECK(train(net, sc, labels, cfg, start).params == start);
  DcParams wrong = start;
  wrong.gamma = Vector::Zero(2);
  CHECK_THROWS_AS(train(net, sc, labels, cfg, wrong), Error);
}

TEST_CASE("train: 14-bus against AC-OPF labels improves on cold start") {
  const auto net = load_network(fixtures::case_path("pglib_opf_case14_ieee.m"));
  const auto sc = generate_scenarios(net, 20, 0.15, 11);
  const auto labels = ac_labels(net, sc);
  TrainConfig cfg;
  cfg.init = InitMode::Both;
  const auto nominal = nominal_state(net);
  const auto res = train(net, sc, labels, cfg, nominal);
  const double cold = loss(cold_start(net), sc, labels, net);
  const double hot = loss(hot_start(net, nominal, fixtures::nominal_demand(net)), sc, labels, net);
  CHECK(res.report.loss.back() < cold);
  CHECK(res.report.loss.back() <= std::min(cold, hot));
  CHECK(non_increasing(res.report.loss));
  CHECK(res.report.final_params == res.params);
  CHECK(res.report.wall_time_s > 0.0);
  MESSAGE("14-bus train loss: cold " << cold << ", hot " << hot << ", trained " << res.report.loss.back() << " ("
                                     << res.report.init_mode << ", " << res.report.iterations() << " iterations, "
                                     << res.report.wall_time_s << " s)");
}
