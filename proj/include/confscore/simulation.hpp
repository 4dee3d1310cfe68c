#pragma once
// Synthetic designs with known nuisance functions, a Monte Carlo oracle for
// the true difference score, and selection / coverage metrics.
//
//   low_dim / high_dim  C ~ N_p(0, Sigma), Sigma_jk = rho^|j-k|
//                       logit Pr(E=1|C) = sum alpha_j C_j
//                       O = theta E + sum beta_j C_j + N(0,1)
//                       alpha_j = 1 for j in 1..5, 11..15; beta_j = 0.6 for j in 1..10
//   misspecified        C ~ N_p(0, I)
//                       logit Pr(E=1|C) = -15 + sum_{1..5} 3 sin(3 C_j)
//                                        + sum_{11..15} (C_j^3 - C_j + 3)
//                       O = theta E + sum_{1..5} 1.8 sin(3 C_j)
//                           + sum_{6..10} 1.8 cos(4 C_j) + N(0,1)
//   uniform_closed_form C_j ~ U[0,1] iid, Pr(E=1|C) = sum alpha_j C_j,
//                       O = theta E + sum beta_j C_j + N(0,1);
//                       phi_j = (alpha_j / 3)(beta_j + theta alpha_j)

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confscore/data.hpp"
#include "confscore/estimators.hpp"
#include "confscore/ranking.hpp"

namespace confscore {

enum class ScenarioKind { low_dim, high_dim, misspecified, uniform_closed_form };

std::string_view scenario_kind_name(ScenarioKind kind);
ScenarioKind parse_scenario_kind(std::string_view text);

enum class Label { confounder, precision, instrument, spurious };

std::string_view label_name(Label label);

struct SimScenario {
  ScenarioKind kind = ScenarioKind::low_dim;
  std::size_t n = 500;
  std::size_t p = 30;
  double rho = 0.0;
  double theta = 0.0;
  std::uint64_t seed = 1;
  std::size_t replicates = 1;
  /// uniform_closed_form only: exposure weights (positive, summing to 1) and
  /// outcome coefficients, one per covariate.
  std::vector<double> alpha;
  std::vector<double> beta;

  /// Defaults p to 1000 for high_dim and fills design coefficients.
  static SimScenario preset(ScenarioKind kind);
  void validate() const;
};

/// Parses a JSON scenario object; unknown keys are rejected.
SimScenario parse_scenario(std::string_view json_text);
std::string scenario_to_json(const SimScenario& scenario);

struct SimData {
  Dataset data;
  std::vector<Label> labels;
  /// True propensity Pr(E=1|C) of each row.
  std::vector<double> propensity;
};

/// Replicate r of a scenario is drawn from RNG stream r.
SimData gen_low_dim(const SimScenario& scenario, std::uint64_t replicate = 0);
SimData gen_high_dim(const SimScenario& scenario, std::uint64_t replicate = 0);
SimData gen_misspecified(const SimScenario& scenario, std::uint64_t replicate = 0);
SimData gen_uniform(const SimScenario& scenario, std::uint64_t replicate = 0);
SimData generate(const SimScenario& scenario, std::uint64_t replicate = 0);

std::vector<Label> truth_labels(const SimScenario& scenario);

struct OracleValue {
  double phi = 0.0;
  double mc_se = 0.0;
};

/// Monte Carlo value of the difference score of a covariate group (0-based
/// column indices) using the generator's true nuisance functions. The
/// integral over the remaining covariates is done by 64-node Gauss-Hermite
/// quadrature in the Gaussian designs and exactly in the uniform design.
OracleValue oracle_phi(const SimScenario& scenario, std::span<const std::size_t> group,
                       std::size_t mc_size = 10'000'000, std::uint64_t oracle_seed = 0x5eed);
OracleValue oracle_phi(const SimScenario& scenario, std::size_t j,
                       std::size_t mc_size = 10'000'000, std::uint64_t oracle_seed = 0x5eed);

/// Nodes and weights of the physicists' Gauss-Hermite rule (weight e^{-x^2}).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermite& gauss_hermite_64();

struct SelectionQuality {
  double sensitivity = 0.0;
  double specificity = 1.0;
};

/// Positives are exactly the confounders.
SelectionQuality evaluate_selection(std::span<const std::size_t> selected,
                                    std::span<const Label> labels);

struct RocPoint {
  std::size_t k = 0;
  double sensitivity = 0.0;
  double false_positive_rate = 0.0;
};

/// Sweeps K = 0..p over the report's rank order.
std::vector<RocPoint> roc_curve(const RankingReport& report, std::span<const Label> labels);
/// Trapezoidal area under (false_positive_rate, sensitivity).
double roc_auc(std::span<const RocPoint> curve);

struct SimulationConfig {
  SimScenario scenario;
  EstimatorKind estimator = EstimatorKind::tmle;
  ScoreKind score_kind = ScoreKind::difference;
  BasisConfig basis;
  double alpha = 0.10;
  SelectionRule rule = SelectionRule::test(0.10);
  std::size_t oracle_mc_size = 200'000;
  std::uint64_t oracle_seed = 0x5eed;
  /// Skip the oracle (coverage columns are then left empty).
  bool with_oracle = true;
  unsigned threads = 1;
};

struct ReplicateResult {
  std::size_t replicate = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
  /// All confounders occupy the top (number of confounders) ranks.
  bool confounders_on_top = false;
  std::vector<double> phi;
  std::vector<double> se_phi;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::vector<char> selected;
  std::vector<char> covered;  // empty without oracle or inference
  std::vector<RocPoint> roc;
  double min_propensity = 0.0;
  double max_propensity = 0.0;
  /// Share of rows with true propensity outside [0.01, 0.99].
  double extreme_propensity_share = 0.0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

struct SimResult {
  SimulationConfig config;
  std::vector<Label> labels;
  std::vector<OracleValue> oracle;  // per covariate, empty without oracle
  std::vector<ReplicateResult> replicates;

  MeanSe sensitivity;
  MeanSe specificity;
  MeanSe auc;
  double confounders_on_top_rate = 0.0;
  std::vector<MeanSe> phi;       // per covariate
  std::vector<MeanSe> coverage;  // per covariate, binomial se
  std::vector<RocPoint> mean_roc;
};

SimResult run_simulation(const SimulationConfig& config);

/// Per-covariate coverage of the level-(1 - alpha) intervals of `estimator`
/// around the oracle, with binomial standard errors.
std::vector<MeanSe> coverage_experiment(const SimScenario& scenario, EstimatorKind estimator,
                                        double level, std::size_t replicates,
                                        const BasisConfig& basis = {},
                                        unsigned threads = 1);

MeanSe mean_se(std::span<const double> values);

}  // namespace confscore
