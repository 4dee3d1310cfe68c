#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "confscore/error.hpp"
#include "confscore/estimators.hpp"
#include "confscore/influence.hpp"
#include "confscore/pipeline.hpp"
#include "confscore/simulation.hpp"
#include "support.hpp"

using namespace confscore;

namespace {

double phi_of(double t, double o, double e) { return t / e - (o - t) / (1 - e); }
double psi_of(double t, double o, double e) { return (t / e) / ((o - t) / (1 - e)); }

// Directional central difference of f at (t, o, e) along (dt, dmo, dme).
template <class F>
double directional(F f, double t, double o, double e, double dt, double dmo, double dme) {
  const double h = 1e-6;
  return (f(t + h * dt, o + h * dmo, e + h * dme) - f(t - h * dt, o - h * dmo, e - h * dme)) /
         (2 * h);
}

// A commonly quoted closed form of the score curves, kept to show that it
// disagrees with the derivative of the score definitions.
double printed_ic_phi(double dt, double dmo, double dme, double t, double o, double e) {
  return dt / (e * (1 - e)) - dmo / (1 - e) - dme * (t / e + (o - t) / ((1 - e) * (1 - e)));
}
double printed_ic_psi(double dt, double dmo, double dme, double t, double o, double e) {
  const double psi = psi_of(t, o, e);
  return psi * (o * dt / (t * (o - t)) - dmo / (o - t) - (1 / e - 1) * dme);
}

}  // namespace

TEST_CASE("efficient influence curve of theta") {
  CHECK(eic_theta(1, 1, 0.5, 0.5, 0.25) == 0.5);
  CHECK(eic_theta(0, 0, 0, 0, 0) == 0.0);

  const Dataset d = testing::six_rows();
  const Target t{0, "C", {0}};
  const NuisanceValues v = fit_saturated(d, t).values_at(d, t);
  double s = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i)
    s += eic_theta(d.outcome()[i], d.exposure()[i], v.pi[i], v.tau[i], 0.25);
  CHECK(std::abs(s / d.n()) < 1e-12);
}

TEST_CASE("centered curves of the means") {
  CHECK(ic_mu(1.0, 0.5) == 0.5);
  CHECK(ic_mu(0.0, 0.5) == -0.5);
  const std::vector<double> x{0.3, 1.7, -2.0, 4.4};
  const double m = testing::mean(x);
  double s = 0.0;
  for (double v : x) s += ic_mu(v, m);
  CHECK(std::abs(s) < 1e-14);
}

TEST_CASE("score curve examples") {
  CHECK(ic_phi(0, 0, 0, 0.25, 0.5, 0.5) == 0.0);
  CHECK(ic_phi(0.5, 0.5, 0.5, 0.25, 0.5, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(ic_phi(1, 1, 1, 0.2, 0.5, 1.0), Error);
  CHECK(*ic_psi(0, 0, 0, 0.3, 0.5, 0.5) == 0.0);
  CHECK(*ic_psi(1, 0, 0, 0.3, 0.5, 0.5) == doctest::Approx(12.5).epsilon(1e-13));
  CHECK_FALSE(ic_psi(1, 0, 0, 0.5, 0.5, 0.5).has_value());
  CHECK_FALSE(ic_psi(1, 0, 0, -0.1, 0.5, 0.5).has_value());
}

TEST_CASE("score curves match finite differences; the quoted closed forms do not") {
  std::mt19937_64 gen(1234);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_phi = 0.0, worst_psi = 0.0, printed_phi = 0.0, printed_psi = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double e = 0.1 + 0.8 * u(gen);
    const double t = 0.05 + 2.0 * u(gen);
    const double gap = (0.05 + 2.0 * u(gen)) * (u(gen) < 0.5 ? -1 : 1);
    const double o = t + gap;
    if (o - t < 0.05 && o - t > -0.05) continue;
    const double dt = z(gen), dmo = z(gen), dme = z(gen);
    const double fd_phi = directional(phi_of, t, o, e, dt, dmo, dme);
    const double fd_psi = directional(psi_of, t, o, e, dt, dmo, dme);
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-3, std::abs(b)); };
    worst_phi = std::max(worst_phi, rel(ic_phi(dt, dmo, dme, t, o, e), fd_phi));
    worst_psi = std::max(worst_psi, rel(*ic_psi(dt, dmo, dme, t, o, e), fd_psi));
    printed_phi = std::max(printed_phi, rel(printed_ic_phi(dt, dmo, dme, t, o, e), fd_phi));
    printed_psi = std::max(printed_psi, rel(printed_ic_psi(dt, dmo, dme, t, o, e), fd_psi));
  }
  MESSAGE("relative error phi " << worst_phi << ", psi " << worst_psi << "; quoted forms "
                                << printed_phi << ", " << printed_psi);
  CHECK(worst_phi < 1e-4);
  CHECK(worst_psi < 1e-4);
  CHECK(printed_phi > 1e-2);
  CHECK(printed_psi > 1e-2);
}

TEST_CASE("normal functions against reference values") {
  struct P {
    double x, v;
  };
  for (auto [x, v] : {P{-1.96, 0.024997895148220435}, P{1.0, 0.8413447460685429},
                      P{-8.0, 6.22096057427174e-16}, P{0.3, 0.6179114221889526},
                      P{6.5, 0.99999999995984}, P{-3.2, 0.0006871379379158471}}) {
    CAPTURE(x);
    CHECK(std::abs(normal_cdf(x) - v) <= 1e-14 * std::max(v, 1e-2));
  }
  CHECK(normal_cdf(-40.0) == 0.0);
  CHECK(normal_cdf(0.0) == 0.5);
  for (auto [p, v] : {P{0.975, 1.959963984540054}, P{1e-10, -6.361340902404056},
                      P{0.95, 1.6448536269514722}, P{0.3, -0.5244005127080409},
                      P{1 - 1e-12, 7.0344869100478356}, P{0.02, -2.053748910631823}}) {
    CAPTURE(p);
    CHECK(std::abs(normal_quantile(p) - v) <= 1e-13 * std::max(1.0, std::abs(v)));
  }
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK_THROWS_AS(normal_quantile(0.0), Error);
  CHECK_THROWS_AS(normal_quantile(1.0), Error);
  for (double p = 0.001; p < 1.0; p += 0.0123)
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
}

TEST_CASE("Wald inference") {
  const std::vector<double> zero(10, 0.0);
  auto r = wald_inference(zero, 0.0, 0.0, 0.1);
  CHECK(r.se == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK(r.ci_lo == 0.0);
  CHECK(r.ci_hi == 0.0);
  r = wald_inference(zero, 0.2, 0.0, 0.1);
  CHECK(r.p_value == 0.0);

  CHECK(std::abs(normal_quantile(0.95) - 1.6449) < 1e-4);
  const std::vector<double> ic{1, -1, 2, -2, 0.5, -0.5};
  r = wald_inference(ic, 0.3, 0.0, 0.1);
  const double se = testing::sd(ic) / std::sqrt(6.0);
  CHECK(r.se == doctest::Approx(se).epsilon(1e-15));
  CHECK(0.5 * (r.ci_lo + r.ci_hi) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(0.5 * (r.ci_hi - r.ci_lo) == doctest::Approx(normal_quantile(0.95) * se).epsilon(1e-14));
  CHECK(r.p_value == doctest::Approx(2 * normal_cdf(-0.3 / se)).epsilon(1e-15));
  CHECK(r.ci_lo <= r.ci_hi);

  // p < alpha exactly when the interval excludes the null
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double est = 0.3 * z(gen);
    const auto w = wald_inference(ic, est, 0.0, 0.1);
    CHECK((w.p_value < 0.1) == (w.ci_lo > 0.0 || w.ci_hi < 0.0));
  }
  CHECK_THROWS_AS(wald_inference(std::vector<double>{1.0}, 0.0, 0.0, 0.1), Error);
  CHECK_THROWS_AS(wald_inference(ic, 0.0, 0.0, 1.5), Error);
}

TEST_CASE("log-scale ratio inference") {
  const std::vector<double> ic{0.4, -0.2, 0.1, -0.3, 0.0, 0.6, -0.6};
  const double psi = 1.4;
  const auto r = wald_inference_log(ic, psi, 0.1);
  const double se_log = testing::sd(ic) / std::sqrt(7.0) / psi;
  const double zq = normal_quantile(0.95);
  CHECK(r.ci_lo == doctest::Approx(std::exp(std::log(psi) - zq * se_log)).epsilon(1e-14));
  CHECK(r.ci_hi == doctest::Approx(std::exp(std::log(psi) + zq * se_log)).epsilon(1e-14));
  CHECK(r.se == doctest::Approx(psi * se_log).epsilon(1e-14));
  CHECK(r.p_value == doctest::Approx(2 * normal_cdf(-std::log(psi) / se_log)).epsilon(1e-14));
  CHECK_THROWS_AS(wald_inference_log(ic, -1.0, 0.1), Error);
}

TEST_CASE("p-values are uniform under the null") {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> z(0.0, 1.0);
  const int reps = 1000;
  const std::size_t n = 10000;
  std::vector<double> ps;
  std::vector<double> ic(n);
  for (int r = 0; r < reps; ++r) {
    for (double& v : ic) v = z(gen);
    ps.push_back(wald_inference(ic, testing::mean(ic), 0.0, 0.1).p_value);
  }
  std::sort(ps.begin(), ps.end());
  double dstat = 0.0;
  for (int i = 0; i < reps; ++i)
    dstat = std::max({dstat, (i + 1.0) / reps - ps[i], ps[i] - double(i) / reps});
  MESSAGE("KS statistic " << dstat);
  CHECK(dstat < 1.628 / std::sqrt(double(reps)));
}

TEST_CASE("score curves are centered for dr and tmle") {
  SimScenario s = SimScenario::preset(ScenarioKind::low_dim);
  s.n = 500;
  const SimData sim = generate(s, 13);
  for (auto kind : {EstimatorKind::dr, EstimatorKind::tmle}) {
    PipelineOptions opt;
    opt.estimator = kind;
    opt.keep_influence = true;
    const auto targets = covariate_targets(sim.data);
    for (const auto& est : score_targets(sim.data, targets, opt)) {
      CAPTURE(estimator_kind_name(kind));
      CAPTURE(est.id);
      CHECK(std::abs(testing::mean(est.ic.d_phi)) <= 1e-6);
      if (!est.ic.d_psi.empty()) CHECK(std::abs(testing::mean(est.ic.d_psi)) <= 1e-6);
    }
  }
}

TEST_CASE("influence-based standard errors match the replicate spread") {
  SimScenario s = SimScenario::preset(ScenarioKind::low_dim);
  s.n = 500;
  s.p = 15;
  s.seed = 7;
  std::vector<double> phi, se;
  PipelineOptions opt;
  opt.estimator = EstimatorKind::tmle;
  const Target t{0, "C1", {0}};
  for (std::uint64_t r = 0; r < 500; ++r) {
    const SimData sim = generate(s, r);
    const auto est = estimate_target(sim.data, t, opt);
    phi.push_back(est.phi);
    se.push_back(est.inference->phi.se);
  }
  const double ratio = testing::mean(se) / testing::sd(phi);
  MESSAGE("mean se / sd(phi) = " << ratio);
  CHECK(std::abs(ratio - 1.0) < 0.15);
}
