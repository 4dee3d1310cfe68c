#include <doctest.h>

#include <chrono>
#include <cmath>

#include <Eigen/Dense>

#include "confscore/error.hpp"
#include "confscore/rng.hpp"
#include "confscore/simulation.hpp"
#include "support.hpp"

using namespace confscore;

namespace {

double correlation(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        PhiloxBlock{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                      {0xffffffff, 0xffffffff}) ==
        PhiloxBlock{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                      {0xa4093822, 0x299f31d0}) ==
        PhiloxBlock{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("random streams are reproducible and well spread") {
  RandomStream a(42, 7), b(42, 7), c(42, 8);
  bool differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differ = differ || x != c.next_u64();
  }
  CHECK(differ);
  CHECK(a.position() == 100);

  RandomStream s(1, 0);
  std::vector<double> z;
  double umin = 1.0, umax = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = s.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    z.push_back(s.normal());
  }
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
  CHECK(std::abs(testing::mean(z)) < 0.01);
  CHECK(std::abs(testing::sd(z) - 1.0) < 0.01);
}

TEST_CASE("low-dimensional design sanity") {
  SimScenario s = SimScenario::preset(ScenarioKind::low_dim);
  s.n = 20000;
  const SimData sim = generate(s, 0);
  const Dataset& d = sim.data;
  CHECK(d.p() == 30);
  CHECK(std::abs(correlation(d.column(0), d.column(1))) < 0.05);
  CHECK(std::abs(correlation(d.column(3), d.column(20))) < 0.05);
  CHECK(std::abs(d.exposure_rate() - 0.5) < 0.02);

  Eigen::MatrixXd x(d.n(), d.p() + 2);
  Eigen::VectorXd y(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = d.exposure()[i];
    for (std::size_t j = 0; j < d.p(); ++j) x(i, j + 2) = d.column(j)[i];
    y[i] = d.outcome()[i];
  }
  const Eigen::VectorXd b = x.colPivHouseholderQr().solve(y);
  CHECK(std::abs(b[1]) < 0.05);
  CHECK(std::abs(b[2] - 0.6) < 0.05);

  s.rho = 0.5;
  const SimData corr = generate(s, 0);
  CHECK(std::abs(correlation(corr.data.column(0), corr.data.column(1)) - 0.5) < 0.03);
  CHECK(std::abs(correlation(corr.data.column(0), corr.data.column(2)) - 0.25) < 0.03);

  const auto labels = truth_labels(SimScenario::preset(ScenarioKind::low_dim));
  CHECK(labels[0] == Label::confounder);
  CHECK(labels[5] == Label::precision);
  CHECK(labels[10] == Label::instrument);
  CHECK(labels[15] == Label::spurious);
}

TEST_CASE("high-dimensional generation is fast and labelled") {
  const SimScenario s = SimScenario::preset(ScenarioKind::high_dim);
  CHECK(s.p == 1000);
  const auto t0 = std::chrono::steady_clock::now();
  const SimData sim = generate(s, 0);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("500 x 1000 generation: " << secs << " s");
  CHECK(secs < 2.0);
  int counts[4] = {0, 0, 0, 0};
  for (Label l : sim.labels) counts[static_cast<int>(l)] += 1;
  CHECK(counts[0] == 5);
  CHECK(counts[1] == 5);
  CHECK(counts[2] == 5);
  CHECK(counts[3] == 985);
}

TEST_CASE("misspecified design sanity") {
  SimScenario s = SimScenario::preset(ScenarioKind::misspecified);
  s.n = 20000;
  const SimData sim = generate(s, 0);
  const double rate = sim.data.exposure_rate();
  MESSAGE("misspecified mean(E) = " << rate);
  CHECK(rate > 0.0);
  CHECK(rate < 1.0);

  const std::vector<double> y(sim.data.outcome().begin(), sim.data.outcome().end());
  const double sin2 = (1.0 - std::exp(-18.0)) / 2.0;
  const double cos2 = (1.0 + std::exp(-32.0)) / 2.0;
  const double cos_mean = std::exp(-8.0);
  const double analytic =
      1.0 + 5 * 1.8 * 1.8 * sin2 + 5 * 1.8 * 1.8 * (cos2 - cos_mean * cos_mean);
  const double v = testing::sd(y) * testing::sd(y);
  MESSAGE("var(Y) " << v << " vs " << analytic);
  CHECK(std::abs(v / analytic - 1.0) < 0.05);
}

TEST_CASE("Gauss-Hermite rule integrates polynomials exactly") {
  const auto& gh = gauss_hermite_64();
  REQUIRE(gh.nodes.size() == 64);
  for (int k = 0; k <= 40; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < 64; ++i) s += gh.weights[i] * std::pow(gh.nodes[i], 2 * k);
    const double exact = std::tgamma(k + 0.5);
    CAPTURE(k);
    CHECK(std::abs(s / exact - 1.0) < 1e-10);
  }
}

TEST_CASE("oracle values") {
  SimScenario u = SimScenario::preset(ScenarioKind::uniform_closed_form);
  const auto o1 = oracle_phi(u, 0, 400000);
  const auto o2 = oracle_phi(u, 1, 400000);
  MESSAGE("uniform oracle " << o1.phi << " +- " << o1.mc_se);
  CHECK(std::abs(o1.phi - 1.0 / 6.0) < 3 * o1.mc_se);
  CHECK(std::abs(o2.phi) < 3 * o2.mc_se + 1e-12);

  const SimScenario low = SimScenario::preset(ScenarioKind::low_dim);
  const auto conf = oracle_phi(low, 0, 200000);
  MESSAGE("low_dim confounder oracle " << conf.phi << " +- " << conf.mc_se);
  CHECK(conf.phi >= 0.15);
  CHECK(conf.phi <= 0.35);
  for (std::size_t j : {10u, 12u, 20u, 29u}) {
    const auto o = oracle_phi(low, j, 200000);
    CAPTURE(j);
    CHECK(std::abs(o.phi) < 3 * o.mc_se + 1e-12);
  }
  const auto prec = oracle_phi(low, 6, 200000);
  CHECK(std::abs(prec.phi) < 3 * prec.mc_se + 1e-12);

  SimScenario effect = low;
  effect.theta = 2.0;
  const auto inst = oracle_phi(effect, 11, 200000);
  const auto conf2 = oracle_phi(effect, 1, 200000);
  MESSAGE("theta = 2: instrument " << inst.phi << ", confounder " << conf2.phi);
  CHECK(inst.phi > 3 * inst.mc_se);
  CHECK(inst.phi < conf2.phi);

  const SimScenario mis = SimScenario::preset(ScenarioKind::misspecified);
  const auto spur = oracle_phi(mis, 20, 100000);
  CHECK(std::abs(spur.phi) < 3 * spur.mc_se + 1e-12);

  const std::vector<std::size_t> group{0, 1};
  const auto g = oracle_phi(low, group, 100000);
  CHECK(g.phi > conf.phi);
}

TEST_CASE("selection quality and ROC") {
  const auto labels = truth_labels(SimScenario::preset(ScenarioKind::low_dim));
  std::vector<std::size_t> conf{0, 1, 2, 3, 4};
  auto q = evaluate_selection(conf, labels);
  CHECK(q.sensitivity == 1.0);
  CHECK(q.specificity == 1.0);
  q = evaluate_selection(std::vector<std::size_t>{}, labels);
  CHECK(q.sensitivity == 0.0);
  CHECK(q.specificity == 1.0);
  std::vector<std::size_t> all(labels.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  q = evaluate_selection(all, labels);
  CHECK(q.sensitivity == 1.0);
  CHECK(q.specificity == 0.0);

  const SimScenario s = SimScenario::preset(ScenarioKind::low_dim);
  std::vector<ScoreEstimate> est;
  for (std::size_t j = 0; j < s.p; ++j) {
    ScoreEstimate e;
    e.id = j;
    e.kind = EstimatorKind::tmle;
    e.phi = oracle_phi(s, j, 20000).phi;
    est.push_back(e);
  }
  const auto report = rank(est, ScoreKind::difference);
  const auto roc = roc_curve(report, labels);
  REQUIRE(roc.size() == s.p + 1);
  CHECK(roc.front().sensitivity == 0.0);
  CHECK(roc.front().false_positive_rate == 0.0);
  CHECK(roc.back().sensitivity == 1.0);
  CHECK(roc.back().false_positive_rate == 1.0);
  for (std::size_t k = 1; k < roc.size(); ++k) {
    CHECK(roc[k].sensitivity >= roc[k - 1].sensitivity);
    CHECK(roc[k].false_positive_rate >= roc[k - 1].false_positive_rate);
  }
  CHECK(roc_auc(roc) == 1.0);
}

TEST_CASE("scenario files") {
  const auto s = parse_scenario(R"({"kind": "low_dim", "n": 200, "theta": 2, "seed": 9})");
  CHECK(s.kind == ScenarioKind::low_dim);
  CHECK(s.n == 200);
  CHECK(s.p == 30);
  CHECK(s.theta == 2.0);
  const auto back = parse_scenario(scenario_to_json(s));
  CHECK(back.n == s.n);
  CHECK(back.seed == s.seed);
  CHECK(back.theta == s.theta);

  const auto u = parse_scenario(
      R"({"kind": "uniform_closed_form", "alpha": [0.3, 0.3, 0.4], "beta": [1, 0.5, 0], "theta": 1})");
  CHECK(u.p == 3);
  CHECK(truth_labels(u)[2] == Label::instrument);

  CHECK_THROWS_AS(parse_scenario(R"({"kind": "low_dim", "colour": 1})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"kind": "low_dim", "p": 10})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"kind": "low_dim", "rho": 1.0})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"kind": "misspecified", "rho": 0.3})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"kind": "uniform_closed_form", "alpha": [0.5, 0.6], "beta": [0, 0]})"),
                  Error);
  CHECK_THROWS_AS(parse_scenario(R"({"kind": "low_dim", "alpha": [1]})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"kind": "nope"})"), Error);
  CHECK_THROWS_AS(parse_scenario("[1, 2]"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"kind": "low_dim", "n": "many"})"), Error);
}

TEST_CASE("replicates are independent of order and thread count") {
  SimScenario s = SimScenario::preset(ScenarioKind::low_dim);
  s.n = 200;
  const SimData a = generate(s, 3);
  generate(s, 0);
  const SimData b = generate(s, 3);
  for (std::size_t i = 0; i < s.n; ++i) {
    CHECK(a.data.outcome()[i] == b.data.outcome()[i]);
    CHECK(a.data.column(29)[i] == b.data.column(29)[i]);
  }
  CHECK(generate(s, 4).data.outcome()[0] != a.data.outcome()[0]);

  s.replicates = 4;
  SimulationConfig cfg;
  cfg.scenario = s;
  cfg.oracle_mc_size = 20000;
  const SimResult one = run_simulation(cfg);
  cfg.threads = 4;
  const SimResult four = run_simulation(cfg);
  REQUIRE(one.replicates.size() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(one.replicates[r].phi == four.replicates[r].phi);
    CHECK(one.replicates[r].selected == four.replicates[r].selected);
    CHECK(one.replicates[r].covered == four.replicates[r].covered);
  }
  CHECK(one.sensitivity.mean == four.sensitivity.mean);
  CHECK(one.oracle.size() == s.p);
  CHECK(one.mean_roc.size() == s.p + 1);
  CHECK(one.replicates[0].min_propensity > 0.0);
  CHECK(one.replicates[0].max_propensity < 1.0);
}

TEST_CASE("coverage experiment on the uniform design") {
  SimScenario s = SimScenario::preset(ScenarioKind::uniform_closed_form);
  s.n = 2000;
  s.seed = 5;
  const auto cov = coverage_experiment(s, EstimatorKind::dr, 0.90, 100, BasisConfig{1});
  REQUIRE(cov.size() == 2);
  for (const auto& c : cov) {
    MESSAGE("coverage " << c.mean << " +- " << c.se);
    CHECK(c.mean > 0.75);
  }
  CHECK_THROWS_AS(coverage_experiment(s, EstimatorKind::plugin_om, 0.9, 2), Error);
}

TEST_CASE("mean and standard error") {
  const std::vector<double> v{1, 2, 3, 4};
  const auto m = mean_se(v);
  CHECK(m.mean == 2.5);
  CHECK(m.se == doctest::Approx(testing::sd(v) / 2.0).epsilon(1e-15));
}
