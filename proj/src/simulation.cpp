#include "confscore/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <tuple>

#include <Eigen/Dense>
#include <json.hpp>

#include "confscore/error.hpp"
#include "confscore/pipeline.hpp"
#include "confscore/rng.hpp"

namespace confscore {

namespace {

constexpr std::size_t kDesignWidth = 15;

double expit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// alpha/beta of the Gaussian designs, length p
std::vector<double> gaussian_alpha(std::size_t p) {
  std::vector<double> a(p, 0.0);
  for (std::size_t j = 0; j < 5; ++j) a[j] = 1.0;
  for (std::size_t j = 10; j < 15; ++j) a[j] = 1.0;
  return a;
}

std::vector<double> gaussian_beta(std::size_t p) {
  std::vector<double> b(p, 0.0);
  for (std::size_t j = 0; j < 10; ++j) b[j] = 0.6;
  return b;
}

// Additive pieces of the misspecified design (0-based j).
double mis_logit_term(std::size_t j, double c) {
  if (j < 5) return 3.0 * std::sin(3.0 * c);
  if (j >= 10 && j < 15) return c * c * c - c + 3.0;
  return 0.0;
}

double mis_outcome_term(std::size_t j, double c) {
  if (j < 5) return 1.8 * std::sin(3.0 * c);
  if (j >= 5 && j < 10) return 1.8 * std::cos(4.0 * c);
  return 0.0;
}

std::vector<std::string> column_names(std::size_t p) {
  std::vector<std::string> names(p);
  for (std::size_t j = 0; j < p; ++j) names[j] = "C" + std::to_string(j + 1);
  return names;
}

SimData assemble(const SimScenario& s, std::vector<double> outcome, std::vector<int> exposure,
                 std::vector<std::vector<double>> columns, std::vector<double> propensity) {
  return SimData{Dataset::create(std::move(outcome), std::move(exposure), std::move(columns),
                                 column_names(s.p)),
                 truth_labels(s), std::move(propensity)};
}

SimData gen_gaussian(const SimScenario& s, std::uint64_t replicate) {
  const auto alpha = gaussian_alpha(s.p);
  const auto beta = gaussian_beta(s.p);
  RandomStream rng(s.seed, replicate);
  const double tail = std::sqrt(1.0 - s.rho * s.rho);
  std::vector<std::vector<double>> cols(s.p, std::vector<double>(s.n));
  std::vector<double> outcome(s.n), prop(s.n);
  std::vector<int> exposure(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    double prev = 0.0, lin_e = 0.0, lin_o = 0.0;
    for (std::size_t j = 0; j < s.p; ++j) {
      const double z = rng.normal();
      const double c = j == 0 ? z : s.rho * prev + tail * z;
      cols[j][i] = c;
      prev = c;
      lin_e += alpha[j] * c;
      lin_o += beta[j] * c;
    }
    prop[i] = expit(lin_e);
    exposure[i] = rng.uniform() < prop[i] ? 1 : 0;
    outcome[i] = s.theta * exposure[i] + lin_o + rng.normal();
  }
  return assemble(s, std::move(outcome), std::move(exposure), std::move(cols), std::move(prop));
}

struct Moments {
  // running sums of (w tau, w, (1 - w) tau) and their cross products
  double s[3] = {0, 0, 0};
  double ss[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  std::size_t m = 0;

  void add(double w, double tau) {
    const double x[3] = {w * tau, w, (1.0 - w) * tau};
    for (int a = 0; a < 3; ++a) {
      s[a] += x[a];
      for (int b = 0; b < 3; ++b) ss[a][b] += x[a] * x[b];
    }
    ++m;
  }

  OracleValue value() const {
    const double md = static_cast<double>(m);
    const double A = s[0] / md, B = s[1] / md, C = s[2] / md, D = 1.0 - B;
    OracleValue out;
    out.phi = A / B - C / D;
    const double g[3] = {1.0 / B, -A / (B * B) - C / (D * D), -1.0 / D};
    const double mean[3] = {A, B, C};
    double var = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        var += g[a] * g[b] * (ss[a][b] / md - mean[a] * mean[b]);
    out.mc_se = std::sqrt(std::max(var, 0.0) * md / (md - 1.0) / md);
    return out;
  }
};

double gh_expit(double mu, double sd) {
  if (sd <= 0.0) return expit(mu);
  const GaussHermite& gh = gauss_hermite_64();
  double acc = 0.0;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k)
    acc += gh.weights[k] * expit(mu + std::numbers::sqrt2 * sd * gh.nodes[k]);
  return acc / std::sqrt(std::numbers::pi);
}

OracleValue oracle_gaussian(const SimScenario& s, std::span<const std::size_t> group,
                            std::size_t mc, std::uint64_t seed) {
  const auto alpha = gaussian_alpha(s.p);
  const auto beta = gaussian_beta(s.p);
  const auto cov = [&](std::size_t a, std::size_t b) {
    return std::pow(s.rho, static_cast<double>(a > b ? a - b : b - a));
  };
  // Sigma alpha and Sigma beta restricted to the group; alpha' Sigma alpha
  const std::size_t g = group.size();
  Eigen::VectorXd sa(g), sb(g);
  for (std::size_t a = 0; a < g; ++a) {
    double x = 0.0, y = 0.0;
    for (std::size_t k = 0; k < kDesignWidth && k < s.p; ++k) {
      x += cov(group[a], k) * alpha[k];
      y += cov(group[a], k) * beta[k];
    }
    sa(static_cast<Eigen::Index>(a)) = x;
    sb(static_cast<Eigen::Index>(a)) = y;
  }
  double asa = 0.0;
  for (std::size_t k = 0; k < kDesignWidth && k < s.p; ++k)
    for (std::size_t l = 0; l < kDesignWidth && l < s.p; ++l)
      asa += alpha[k] * cov(k, l) * alpha[l];
  Eigen::MatrixXd sgg(g, g);
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b)
      sgg(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cov(group[a], group[b]);
  const Eigen::LLT<Eigen::MatrixXd> llt(sgg);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::precondition, "group covariance is singular");
  const Eigen::VectorXd u = llt.solve(sa);
  const Eigen::VectorXd v = llt.solve(sb);
  const double resid_sd = std::sqrt(std::max(asa - sa.dot(u), 0.0));
  const Eigen::MatrixXd chol = llt.matrixL();

  RandomStream rng(seed, 0);
  Moments mom;
  Eigen::VectorXd z(g);
  for (std::size_t i = 0; i < mc; ++i) {
    for (std::size_t a = 0; a < g; ++a) z(static_cast<Eigen::Index>(a)) = rng.normal();
    const Eigen::VectorXd c = chol * z;
    const double w = gh_expit(u.dot(c), resid_sd);
    mom.add(w, v.dot(c) + s.theta * w);
  }
  return mom.value();
}

OracleValue oracle_uniform(const SimScenario& s, std::span<const std::size_t> group,
                           std::size_t mc, std::uint64_t seed) {
  std::vector<char> in(s.p, 0);
  for (std::size_t j : group) in[j] = 1;
  double base = 0.0;
  for (std::size_t k = 0; k < s.p; ++k)
    if (!in[k]) base += s.alpha[k] / 2.0;
  RandomStream rng(seed, 0);
  Moments mom;
  for (std::size_t i = 0; i < mc; ++i) {
    double w = base, lin = 0.0;
    for (std::size_t j : group) {
      const double c = rng.uniform();
      w += s.alpha[j] * c;
      lin += s.beta[j] * c;
    }
    mom.add(w, lin + s.theta * w);
  }
  return mom.value();
}

// Weights by the full propensity; the group's propensity inside tau is an
// unbiased single draw over an independent copy of the other covariates.
OracleValue oracle_misspecified(const SimScenario& s, std::span<const std::size_t> group,
                                std::size_t mc, std::uint64_t seed) {
  std::vector<char> in(kDesignWidth, 0);
  for (std::size_t j : group)
    if (j < kDesignWidth) in[j] = 1;
  RandomStream rng(seed, 0);
  Moments mom;
  double c[kDesignWidth];
  for (std::size_t i = 0; i < mc; ++i) {
    double logit_all = -15.0, logit_group = -15.0, tau = 0.0;
    for (std::size_t j = 0; j < kDesignWidth; ++j) {
      c[j] = rng.normal();
      const double t = mis_logit_term(j, c[j]);
      logit_all += t;
      if (in[j]) {
        logit_group += t;
        tau += mis_outcome_term(j, c[j]);
      }
    }
    if (s.theta != 0.0) {
      for (std::size_t j = 0; j < kDesignWidth; ++j)
        if (!in[j]) logit_group += mis_logit_term(j, rng.normal());
      tau += s.theta * expit(logit_group);
    }
    mom.add(expit(logit_all), tau);
  }
  return mom.value();
}

MeanSe binomial(std::span<const char> hits) {
  double k = 0.0;
  for (char h : hits) k += h ? 1.0 : 0.0;
  const double n = static_cast<double>(hits.size());
  const double p = k / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

}  // namespace

std::string_view scenario_kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::low_dim: return "low_dim";
    case ScenarioKind::high_dim: return "high_dim";
    case ScenarioKind::misspecified: return "misspecified";
    case ScenarioKind::uniform_closed_form: return "uniform_closed_form";
  }
  return "low_dim";
}

ScenarioKind parse_scenario_kind(std::string_view text) {
  for (auto k : {ScenarioKind::low_dim, ScenarioKind::high_dim, ScenarioKind::misspecified,
                 ScenarioKind::uniform_closed_form})
    if (scenario_kind_name(k) == text) return k;
  throw Error(ErrorKind::config, "unknown scenario kind '" + std::string(text) + "'");
}

std::string_view label_name(Label label) {
  switch (label) {
    case Label::confounder: return "confounder";
    case Label::precision: return "precision";
    case Label::instrument: return "instrument";
    case Label::spurious: return "spurious";
  }
  return "spurious";
}

SimScenario SimScenario::preset(ScenarioKind kind) {
  SimScenario s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::low_dim:
    case ScenarioKind::misspecified: s.p = 30; break;
    case ScenarioKind::high_dim: s.p = 1000; break;
    case ScenarioKind::uniform_closed_form:
      s.p = 2;
      s.alpha = {0.5, 0.5};
      s.beta = {1.0, 0.0};
      break;
  }
  return s;
}

void SimScenario::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorKind::config, m); };
  if (n < 2) fail("scenario n must be at least 2");
  if (replicates < 1) fail("scenario replicates must be at least 1");
  if (!(rho >= 0.0 && rho < 1.0)) fail("scenario rho must lie in [0, 1)");
  if (!std::isfinite(theta)) fail("scenario theta must be finite");
  if (kind == ScenarioKind::uniform_closed_form) {
    if (p < 1) fail("scenario p must be at least 1");
    if (alpha.size() != p || beta.size() != p)
      fail("uniform_closed_form needs alpha and beta of length p");
    double total = 0.0;
    for (double a : alpha) {
      if (!(a > 0.0)) fail("uniform_closed_form alpha entries must be positive");
      total += a;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("uniform_closed_form alpha must sum to 1");
    for (double b : beta)
      if (!std::isfinite(b)) fail("uniform_closed_form beta must be finite");
  } else {
    if (p < kDesignWidth) fail("scenario p must be at least 15 for this design");
    if (!alpha.empty() || !beta.empty())
      fail("alpha/beta are fixed by the design and only settable for uniform_closed_form");
  }
  if (kind == ScenarioKind::misspecified && rho != 0.0)
    fail("misspecified design uses independent covariates (rho must be 0)");
}

SimScenario parse_scenario(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::parse, "scenario must be a JSON object");
  if (!j.contains("kind")) throw Error(ErrorKind::config, "scenario needs a 'kind'");
  SimScenario s;
  try {
    s = SimScenario::preset(parse_scenario_kind(j.at("kind").get<std::string>()));
    bool p_given = false;
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") continue;
      if (key == "n") s.n = value.get<std::size_t>();
      else if (key == "p") { s.p = value.get<std::size_t>(); p_given = true; }
      else if (key == "rho") s.rho = value.get<double>();
      else if (key == "theta") s.theta = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "replicates") s.replicates = value.get<std::size_t>();
      else if (key == "alpha") s.alpha = value.get<std::vector<double>>();
      else if (key == "beta") s.beta = value.get<std::vector<double>>();
      else throw Error(ErrorKind::config, "unknown scenario field '" + key + "'");
    }
    if (s.kind == ScenarioKind::uniform_closed_form && !p_given) s.p = s.alpha.size();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("bad scenario field: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scenario_to_json(const SimScenario& s) {
  nlohmann::ordered_json j;
  j["kind"] = scenario_kind_name(s.kind);
  j["n"] = s.n;
  j["p"] = s.p;
  j["rho"] = s.rho;
  j["theta"] = s.theta;
  j["seed"] = s.seed;
  j["replicates"] = s.replicates;
  if (s.kind == ScenarioKind::uniform_closed_form) {
    j["alpha"] = s.alpha;
    j["beta"] = s.beta;
  }
  return j.dump();
}

std::vector<Label> truth_labels(const SimScenario& s) {
  std::vector<Label> labels(s.p, Label::spurious);
  if (s.kind == ScenarioKind::uniform_closed_form) {
    for (std::size_t j = 0; j < s.p; ++j)
      labels[j] = s.beta[j] != 0.0 ? Label::confounder : Label::instrument;
    return labels;
  }
  for (std::size_t j = 0; j < kDesignWidth; ++j)
    labels[j] = j < 5 ? Label::confounder : j < 10 ? Label::precision : Label::instrument;
  return labels;
}

SimData gen_low_dim(const SimScenario& s, std::uint64_t replicate) {
  s.validate();
  return gen_gaussian(s, replicate);
}

SimData gen_high_dim(const SimScenario& s, std::uint64_t replicate) {
  s.validate();
  return gen_gaussian(s, replicate);
}

SimData gen_misspecified(const SimScenario& s, std::uint64_t replicate) {
  s.validate();
  RandomStream rng(s.seed, replicate);
  std::vector<std::vector<double>> cols(s.p, std::vector<double>(s.n));
  std::vector<double> outcome(s.n), prop(s.n);
  std::vector<int> exposure(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    double lin_e = -15.0, lin_o = 0.0;
    for (std::size_t j = 0; j < s.p; ++j) {
      const double c = rng.normal();
      cols[j][i] = c;
      lin_e += mis_logit_term(j, c);
      lin_o += mis_outcome_term(j, c);
    }
    prop[i] = expit(lin_e);
    exposure[i] = rng.uniform() < prop[i] ? 1 : 0;
    outcome[i] = s.theta * exposure[i] + lin_o + rng.normal();
  }
  return assemble(s, std::move(outcome), std::move(exposure), std::move(cols), std::move(prop));
}

SimData gen_uniform(const SimScenario& s, std::uint64_t replicate) {
  s.validate();
  RandomStream rng(s.seed, replicate);
  std::vector<std::vector<double>> cols(s.p, std::vector<double>(s.n));
  std::vector<double> outcome(s.n), prop(s.n);
  std::vector<int> exposure(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    double pe = 0.0, lin_o = 0.0;
    for (std::size_t j = 0; j < s.p; ++j) {
      const double c = rng.uniform();
      cols[j][i] = c;
      pe += s.alpha[j] * c;
      lin_o += s.beta[j] * c;
    }
    prop[i] = pe;
    exposure[i] = rng.uniform() < pe ? 1 : 0;
    outcome[i] = s.theta * exposure[i] + lin_o + rng.normal();
  }
  return assemble(s, std::move(outcome), std::move(exposure), std::move(cols), std::move(prop));
}

SimData generate(const SimScenario& s, std::uint64_t replicate) {
  switch (s.kind) {
    case ScenarioKind::low_dim: return gen_low_dim(s, replicate);
    case ScenarioKind::high_dim: return gen_high_dim(s, replicate);
    case ScenarioKind::misspecified: return gen_misspecified(s, replicate);
    case ScenarioKind::uniform_closed_form: return gen_uniform(s, replicate);
  }
  return gen_low_dim(s, replicate);
}

const GaussHermite& gauss_hermite_64() {
  // Golub-Welsch starting nodes, polished by Newton on the orthonormal
  // Hermite recurrence; weights 1 / (m p_{m-1}(x)^2) keep full relative
  // accuracy in the tails.
  static const GaussHermite rule = [] {
    constexpr int m = 64;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    const auto hermite = [](double x, double& pm, double& pm1) {
      double p0 = 1.0 / std::sqrt(std::sqrt(std::numbers::pi)), p1 = 0.0;
      for (int k = 0; k < m; ++k) {
        const double next = std::sqrt(2.0 / (k + 1)) * x * p0 - std::sqrt(double(k) / (k + 1)) * p1;
        p1 = p0;
        p0 = next;
      }
      pm = p0;
      pm1 = p1;
    };
    GaussHermite gh;
    for (int k = 0; k < m; ++k) {
      double x = eig.eigenvalues()(k), pm = 0.0, pm1 = 0.0;
      for (int it = 0; it < 10; ++it) {
        hermite(x, pm, pm1);
        const double step = pm / (std::sqrt(2.0 * m) * pm1);
        x -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
      }
      hermite(x, pm, pm1);
      gh.nodes.push_back(x);
      gh.weights.push_back(1.0 / (m * pm1 * pm1));
    }
    return gh;
  }();
  return rule;
}

OracleValue oracle_phi(const SimScenario& s, std::span<const std::size_t> group,
                       std::size_t mc_size, std::uint64_t oracle_seed) {
  s.validate();
  if (group.empty()) throw Error(ErrorKind::precondition, "oracle needs a non-empty group");
  if (mc_size < 2) throw Error(ErrorKind::config, "oracle needs at least 2 draws");
  for (std::size_t j : group)
    if (j >= s.p) throw Error(ErrorKind::precondition, "oracle covariate index out of range");
  switch (s.kind) {
    case ScenarioKind::low_dim:
    case ScenarioKind::high_dim: return oracle_gaussian(s, group, mc_size, oracle_seed);
    case ScenarioKind::misspecified: return oracle_misspecified(s, group, mc_size, oracle_seed);
    case ScenarioKind::uniform_closed_form: return oracle_uniform(s, group, mc_size, oracle_seed);
  }
  return {};
}

OracleValue oracle_phi(const SimScenario& s, std::size_t j, std::size_t mc_size,
                       std::uint64_t oracle_seed) {
  const std::size_t group[1] = {j};
  return oracle_phi(s, group, mc_size, oracle_seed);
}

SelectionQuality evaluate_selection(std::span<const std::size_t> selected,
                                    std::span<const Label> labels) {
  std::vector<char> chosen(labels.size(), 0);
  for (std::size_t j : selected) {
    if (j >= labels.size()) throw Error(ErrorKind::precondition, "selected index out of range");
    chosen[j] = 1;
  }
  double pos = 0, neg = 0, tp = 0, tn = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] == Label::confounder) {
      ++pos;
      tp += chosen[j];
    } else {
      ++neg;
      tn += !chosen[j];
    }
  }
  return {pos > 0 ? tp / pos : 0.0, neg > 0 ? tn / neg : 1.0};
}

std::vector<RocPoint> roc_curve(const RankingReport& report, std::span<const Label> labels) {
  double pos = 0, neg = 0;
  for (Label l : labels) (l == Label::confounder ? pos : neg) += 1;
  std::vector<RocPoint> curve;
  curve.reserve(report.rows.size() + 1);
  double tp = 0, fp = 0;
  curve.push_back({0, 0.0, 0.0});
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    (labels[report.rows[k].id] == Label::confounder ? tp : fp) += 1;
    curve.push_back({k + 1, pos > 0 ? tp / pos : 0.0, neg > 0 ? fp / neg : 0.0});
  }
  return curve;
}

double roc_auc(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k)
    area += (curve[k].false_positive_rate - curve[k - 1].false_positive_rate) *
            (curve[k].sensitivity + curve[k - 1].sensitivity) / 2.0;
  return area;
}

MeanSe mean_se(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  if (values.empty()) return {};
  double m = 0.0;
  for (double v : values) m += v;
  m /= n;
  if (values.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

SimResult run_simulation(const SimulationConfig& config) {
  const SimScenario& s = config.scenario;
  s.validate();
  config.basis.validate();
  SimResult result;
  result.config = config;
  result.labels = truth_labels(s);

  if (config.with_oracle) {
    result.oracle.resize(s.p);
    // Oracle values depend on j only through the design's conditional
    // structure; identical keys share one Monte Carlo run.
    std::map<std::tuple<long long, long long, long long>, std::size_t> first;
    std::vector<std::size_t> source(s.p);
    for (std::size_t j = 0; j < s.p; ++j) {
      long long key_a = static_cast<long long>(j), key_b = 0, key_c = 0;
      if (s.kind == ScenarioKind::low_dim || s.kind == ScenarioKind::high_dim ||
          s.kind == ScenarioKind::misspecified) {
        if (j >= kDesignWidth && (s.rho == 0.0 || s.kind == ScenarioKind::misspecified)) {
          key_a = -1;
        } else if (s.kind != ScenarioKind::misspecified) {
          double ca = 0.0, cb = 0.0;
          const auto alpha = gaussian_alpha(kDesignWidth);
          const auto beta = gaussian_beta(kDesignWidth);
          for (std::size_t k = 0; k < kDesignWidth; ++k) {
            const double w = std::pow(s.rho, std::abs(static_cast<double>(j) - static_cast<double>(k)));
            ca += w * alpha[k];
            cb += w * beta[k];
          }
          key_a = std::llround(ca * 1e12);
          key_b = std::llround(cb * 1e12);
          key_c = 1;
        }
      }
      const auto [it, inserted] = first.emplace(std::make_tuple(key_a, key_b, key_c), j);
      source[j] = it->second;
    }
    std::vector<std::size_t> unique;
    for (std::size_t j = 0; j < s.p; ++j)
      if (source[j] == j) unique.push_back(j);
    parallel_for(unique.size(), config.threads, [&](std::size_t u) {
      result.oracle[unique[u]] =
          oracle_phi(s, unique[u], config.oracle_mc_size, config.oracle_seed);
    });
    for (std::size_t j = 0; j < s.p; ++j) result.oracle[j] = result.oracle[source[j]];
  }

  std::vector<Target> targets(s.p);
  for (std::size_t j = 0; j < s.p; ++j) targets[j] = Target{j, "C" + std::to_string(j + 1), {j}};

  PipelineOptions options;
  options.estimator = config.estimator;
  options.basis = config.basis;
  options.alpha = config.alpha;
  options.threads = 1;

  std::size_t confounders = 0;
  for (Label l : result.labels) confounders += l == Label::confounder;

  result.replicates.resize(s.replicates);
  parallel_for(s.replicates, config.threads, [&](std::size_t r) {
    const SimData sim = generate(s, r);
    const auto estimates = score_targets(sim.data, targets, options);
    RankingReport report = rank(estimates, config.score_kind);
    apply_rule(report, config.rule);

    ReplicateResult rep;
    rep.replicate = r;
    const auto q = evaluate_selection(selected_ids(report), result.labels);
    rep.sensitivity = q.sensitivity;
    rep.specificity = q.specificity;
    rep.roc = roc_curve(report, result.labels);
    rep.auc = roc_auc(rep.roc);
    std::size_t top = 0;
    for (std::size_t k = 0; k < confounders && k < report.rows.size(); ++k)
      top += result.labels[report.rows[k].id] == Label::confounder;
    rep.confounders_on_top = top == confounders;

    rep.phi.resize(s.p);
    rep.selected.resize(s.p);
    for (const auto& row : report.rows) rep.selected[row.id] = row.selected;
    const bool inference = has_influence(config.estimator);
    if (inference) {
      rep.se_phi.resize(s.p);
      rep.ci_lo.resize(s.p);
      rep.ci_hi.resize(s.p);
    }
    if (inference && config.with_oracle) rep.covered.resize(s.p);
    for (std::size_t j = 0; j < s.p; ++j) {
      rep.phi[j] = estimates[j].phi;
      if (inference) {
        const WaldResult& w = estimates[j].inference->phi;
        rep.se_phi[j] = w.se;
        rep.ci_lo[j] = w.ci_lo;
        rep.ci_hi[j] = w.ci_hi;
        if (config.with_oracle)
          rep.covered[j] = w.ci_lo <= result.oracle[j].phi && result.oracle[j].phi <= w.ci_hi;
      }
    }
    rep.min_propensity = *std::min_element(sim.propensity.begin(), sim.propensity.end());
    rep.max_propensity = *std::max_element(sim.propensity.begin(), sim.propensity.end());
    double extreme = 0.0;
    for (double pr : sim.propensity) extreme += (pr < 0.01 || pr > 0.99) ? 1.0 : 0.0;
    rep.extreme_propensity_share = extreme / static_cast<double>(s.n);
    result.replicates[r] = std::move(rep);
  });

  const std::size_t R = s.replicates;
  std::vector<double> buf(R);
  const auto collect = [&](auto get) {
    for (std::size_t r = 0; r < R; ++r) buf[r] = get(result.replicates[r]);
    return mean_se(buf);
  };
  result.sensitivity = collect([](const ReplicateResult& r) { return r.sensitivity; });
  result.specificity = collect([](const ReplicateResult& r) { return r.specificity; });
  result.auc = collect([](const ReplicateResult& r) { return r.auc; });
  result.confounders_on_top_rate =
      collect([](const ReplicateResult& r) { return r.confounders_on_top ? 1.0 : 0.0; }).mean;
  result.phi.resize(s.p);
  for (std::size_t j = 0; j < s.p; ++j)
    result.phi[j] = collect([j](const ReplicateResult& r) { return r.phi[j]; });
  if (!result.replicates.front().covered.empty()) {
    result.coverage.resize(s.p);
    std::vector<char> hits(R);
    for (std::size_t j = 0; j < s.p; ++j) {
      for (std::size_t r = 0; r < R; ++r) hits[r] = result.replicates[r].covered[j];
      result.coverage[j] = binomial(hits);
    }
  }
  result.mean_roc = result.replicates.front().roc;
  for (std::size_t k = 0; k < result.mean_roc.size(); ++k) {
    double sens = 0.0, fpr = 0.0;
    for (const auto& rep : result.replicates) {
      sens += rep.roc[k].sensitivity;
      fpr += rep.roc[k].false_positive_rate;
    }
    result.mean_roc[k].sensitivity = sens / static_cast<double>(R);
    result.mean_roc[k].false_positive_rate = fpr / static_cast<double>(R);
  }
  return result;
}

std::vector<MeanSe> coverage_experiment(const SimScenario& scenario, EstimatorKind estimator,
                                        double level, std::size_t replicates,
                                        const BasisConfig& basis, unsigned threads) {
  if (!has_influence(estimator))
    throw Error(ErrorKind::unsupported, "coverage needs an estimator with influence curves");
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorKind::config, "confidence level must lie in (0, 1)");
  SimulationConfig config;
  config.scenario = scenario;
  config.scenario.replicates = replicates;
  config.estimator = estimator;
  config.basis = basis;
  config.alpha = 1.0 - level;
  config.rule = {};
  config.threads = threads;
  return run_simulation(config).coverage;
}

}  // namespace confscore
