#pragma once
// Estimators of theta = E[I(E=1) tau(C)], mu_O and mu_E and of the
// difference and ratio scores built from them:
//   phi = theta/mu_E - (mu_O - theta)/(1 - mu_E)
//   psi = [theta/mu_E] / [(mu_O - theta)/(1 - mu_E)]

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "confscore/data.hpp"
#include "confscore/influence.hpp"
#include "confscore/nuisance.hpp"

namespace confscore {

enum class EstimatorKind { plugin_om, plugin_ps, dr, tmle };

std::string_view estimator_kind_name(EstimatorKind kind);
EstimatorKind parse_estimator_kind(std::string_view text);
bool has_influence(EstimatorKind kind);

struct Scores {
  double phi = 0.0;
  std::optional<double> psi;
};

/// Throws a domain Error unless 0 < mu_e < 1. psi is empty when
/// |mu_o - theta| < 1e-12.
Scores scores_from_theta(double theta, double mu_o, double mu_e);

/// Per-observation influence values; all empty for plug-in estimators.
struct InfluenceValues {
  std::vector<double> d_theta;
  std::vector<double> d_mu_o;
  std::vector<double> d_mu_e;
  std::vector<double> d_phi;
  /// Empty when the ratio curve is undefined.
  std::vector<double> d_psi;

  bool empty() const { return d_theta.empty(); }
};

struct TmleDiagnostics {
  int iterations = 0;
  bool converged = true;
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::vector<std::pair<double, double>> trace;
};

struct ScoreEstimate {
  std::size_t id = 0;
  std::string name;
  EstimatorKind kind = EstimatorKind::tmle;

  double theta = 0.0;
  double mu_o = 0.0;
  double mu_e = 0.0;
  double phi = 0.0;
  std::optional<double> psi;

  InfluenceValues ic;
  std::optional<InferenceResult> inference;

  /// Target has no non-constant member; scores fixed at phi = 0, psi = 1.
  bool constant = false;
  TmleDiagnostics tmle;
  std::vector<std::string> warnings;
};

/// n^-1 sum I(E_i = 1) tau_i
double theta_naive(const Dataset& data, std::span<const double> tau);

/// Within-arm means of tau: theta = mean(E tau), mu_O = mean(tau).
ScoreEstimate plugin_scores_om(const Dataset& data, const NuisanceValues& fit);
/// Propensity form: theta = mean(O pi), mu_O = mean(O).
ScoreEstimate plugin_scores_ps(const Dataset& data, const NuisanceValues& fit);

struct DrOptions {
  /// Use tau = pi Q1 + (1 - pi) Q0 instead of the direct tau fit.
  bool compose_tau = false;
};

/// theta_naive + n^-1 sum (O_i pi_i - tau_i pi_i), with influence values.
ScoreEstimate theta_dr(const Dataset& data, const NuisanceValues& fit,
                       const DrOptions& options = {});

/// Current TMLE fit at the data rows. Logits are kept alongside the
/// probabilities so each fluctuation is applied on the link scale.
struct TmleState {
  std::vector<double> pi;
  std::vector<double> logit_pi;
  std::vector<double> q0;
  std::vector<double> q1;
  /// Filled for bounded outcomes only.
  std::vector<double> logit_q0;
  std::vector<double> logit_q1;
  double eps1 = 0.0;
  double eps2 = 0.0;
  int iteration = 0;
  std::vector<std::pair<double, double>> trace;
  std::vector<std::string> warnings;

  static TmleState from_fit(const NuisanceValues& fit, OutcomeKind kind);
};

/// One offset-logistic MLE along logit(pi) + eps H1 with
/// H1 = -2 pi (Q1 - Q0) - Q0 held at the current pi. Returns eps1.
double fluctuate_pi(TmleState& state, const Dataset& data);
/// One update of Q along H2 = -pi (current pi): closed-form least squares
/// for continuous outcomes, offset-logistic MLE for bounded ones. Returns eps2.
double fluctuate_q(TmleState& state, const Dataset& data);

struct TmleOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
};

ScoreEstimate tmle_theta(const Dataset& data, const NuisanceValues& fit,
                         const TmleOptions& options = {});

/// Result for a target with no usable variation: phi = 0, psi = 1, zero
/// influence curves (when the kind carries them).
ScoreEstimate constant_target_estimate(const Dataset& data, EstimatorKind kind);

/// Fills est.inference; no-op for estimates without influence values.
void attach_inference(ScoreEstimate& est, double alpha, bool log_scale_psi = false);

/// Maps a stored-scale estimate of a rescaled bounded outcome back to the
/// original outcome scale and recomputes the score curves.
void back_transform(ScoreEstimate& est, const AffineMap& map);

}  // namespace confscore
