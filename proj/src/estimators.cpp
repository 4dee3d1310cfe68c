#include "confscore/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "confscore/error.hpp"
#include "confscore/kernels.hpp"

namespace confscore {

namespace {

// logit of the clip bounds
const double kMaxLogit = std::log((1.0 - kProbabilityClip) / kProbabilityClip);

double mean(std::span<const double> v) {
  return kernels::sum(v) / static_cast<double>(v.size());
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double clamp_logit(double eta) { return std::clamp(eta, -kMaxLogit, kMaxLogit); }

void require_arms(const Dataset& data) {
  const double mu_e = data.exposure_rate();
  if (!(mu_e > 0.0 && mu_e < 1.0))
    throw Error(ErrorKind::precondition, "both exposure arms must be present");
}

void require_size(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n)
    throw Error(ErrorKind::precondition,
                std::string("estimator needs fitted ") + what + " values at every row");
}

// Scores and score curves from theta, mu_O, mu_E and their curves.
void finish(ScoreEstimate& est) {
  const Scores s = scores_from_theta(est.theta, est.mu_o, est.mu_e);
  est.phi = s.phi;
  est.psi = s.psi;
  if (est.ic.empty()) return;
  const std::size_t n = est.ic.d_theta.size();
  est.ic.d_phi.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    est.ic.d_phi[i] = ic_phi(est.ic.d_theta[i], est.ic.d_mu_o[i], est.ic.d_mu_e[i],
                             est.theta, est.mu_o, est.mu_e);
  est.ic.d_psi.clear();
  if (!est.psi || est.theta <= 0.0) return;
  est.ic.d_psi.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    est.ic.d_psi[i] = *ic_psi(est.ic.d_theta[i], est.ic.d_mu_o[i], est.ic.d_mu_e[i],
                              est.theta, est.mu_o, est.mu_e);
}

void complete(ScoreEstimate& est, const Dataset& data) {
  finish(est);
  if (!data.outcome_map().is_identity()) back_transform(est, data.outcome_map());
}

void fill_influence(ScoreEstimate& est, const Dataset& data, std::span<const double> pi,
                    std::span<const double> tau) {
  const std::size_t n = data.n();
  const auto o = data.outcome();
  const auto e = data.exposure();
  est.ic.d_theta.resize(n);
  est.ic.d_mu_o.resize(n);
  est.ic.d_mu_e.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    est.ic.d_theta[i] = eic_theta(o[i], e[i], pi[i], tau[i], est.theta);
    est.ic.d_mu_o[i] = ic_mu(o[i], est.mu_o);
    est.ic.d_mu_e[i] = ic_mu(e[i], est.mu_e);
  }
}

// Maximizes the Bernoulli likelihood of y along expit(offset + eps h).
// Newton with step halving; bisection on the score sign if Newton stalls.
double solve_offset_logistic(std::span<const double> offset, std::span<const double> h,
                             std::span<const double> y) {
  if (kernels::dot(h, h) < 1e-14) return 0.0;
  const double tol = 1e-10 * static_cast<double>(y.size());
  double eps = 0.0;
  kernels::LogisticSums s = kernels::logistic_path(offset, h, y, eps);
  for (int step = 0; step < 50; ++step) {
    if (std::abs(s.score) < tol) return eps;
    if (!(s.info > 0.0)) break;
    const double dir = s.score / s.info;
    bool accepted = false;
    double t = 1.0;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      const double cand = eps + t * dir;
      const auto c = kernels::logistic_path(offset, h, y, cand);
      if (std::isfinite(c.loss) && c.loss <= s.loss) {
        eps = cand;
        s = c;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (std::abs(s.score) < tol) return eps;

  // The score is non-increasing in eps: bracket its root and bisect.
  double lo = eps, hi = eps;
  double width = std::max(1.0, std::abs(eps));
  for (int k = 0; k < 64; ++k, width *= 2.0) {
    if (s.score > 0.0) {
      hi = eps + width;
      if (kernels::logistic_path(offset, h, y, hi).score <= 0.0) break;
    } else {
      lo = eps - width;
      if (kernels::logistic_path(offset, h, y, lo).score >= 0.0) break;
    }
  }
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    const auto m = kernels::logistic_path(offset, h, y, mid);
    eps = mid;
    if (std::abs(m.score) < tol || hi - lo < 1e-15 * std::max(1.0, std::abs(mid))) break;
    (m.score > 0.0 ? lo : hi) = mid;
  }
  return eps;
}

}  // namespace

std::string_view estimator_kind_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::plugin_om: return "plugin-om";
    case EstimatorKind::plugin_ps: return "plugin-ps";
    case EstimatorKind::dr: return "dr";
    case EstimatorKind::tmle: return "tmle";
  }
  return "tmle";
}

EstimatorKind parse_estimator_kind(std::string_view text) {
  for (auto k : {EstimatorKind::plugin_om, EstimatorKind::plugin_ps, EstimatorKind::dr,
                 EstimatorKind::tmle})
    if (estimator_kind_name(k) == text) return k;
  throw Error(ErrorKind::config, "unknown estimator '" + std::string(text) +
                                     "' (expected plugin-om, plugin-ps, dr or tmle)");
}

bool has_influence(EstimatorKind kind) {
  return kind == EstimatorKind::dr || kind == EstimatorKind::tmle;
}

Scores scores_from_theta(double theta, double mu_o, double mu_e) {
  if (!(mu_e > 0.0 && mu_e < 1.0))
    throw Error(ErrorKind::domain, "mu_E must lie in (0, 1), got " + std::to_string(mu_e));
  Scores s;
  const double treated = theta / mu_e;
  const double untreated = (mu_o - theta) / (1.0 - mu_e);
  s.phi = treated - untreated;
  if (std::abs(mu_o - theta) >= 1e-12) s.psi = treated / untreated;
  return s;
}

double theta_naive(const Dataset& data, std::span<const double> tau) {
  require_size(tau, data.n(), "tau");
  return kernels::dot(data.exposure(), tau) / static_cast<double>(data.n());
}

ScoreEstimate plugin_scores_om(const Dataset& data, const NuisanceValues& fit) {
  require_arms(data);
  ScoreEstimate est;
  est.kind = EstimatorKind::plugin_om;
  est.theta = theta_naive(data, fit.tau);
  est.mu_o = mean(fit.tau);
  est.mu_e = data.exposure_rate();
  complete(est, data);
  return est;
}

ScoreEstimate plugin_scores_ps(const Dataset& data, const NuisanceValues& fit) {
  require_arms(data);
  require_size(fit.pi, data.n(), "pi");
  ScoreEstimate est;
  est.kind = EstimatorKind::plugin_ps;
  est.theta = kernels::dot(data.outcome(), fit.pi) / static_cast<double>(data.n());
  est.mu_o = data.outcome_mean();
  est.mu_e = data.exposure_rate();
  complete(est, data);
  return est;
}

ScoreEstimate theta_dr(const Dataset& data, const NuisanceValues& fit,
                       const DrOptions& options) {
  require_arms(data);
  const std::size_t n = data.n();
  require_size(fit.pi, n, "pi");
  std::vector<double> tau;
  if (options.compose_tau) {
    require_size(fit.q0, n, "Q");
    tau.resize(n);
    for (std::size_t i = 0; i < n; ++i) tau[i] = compose_tau(fit.pi[i], fit.q0[i], fit.q1[i]);
  } else {
    require_size(fit.tau, n, "tau");
    tau = fit.tau;
  }
  ScoreEstimate est;
  est.kind = EstimatorKind::dr;
  const double nd = static_cast<double>(n);
  const double correction =
      (kernels::dot(data.outcome(), fit.pi) - kernels::dot(tau, fit.pi)) / nd;
  est.theta = theta_naive(data, tau) + correction;
  est.mu_o = data.outcome_mean();
  est.mu_e = data.exposure_rate();
  fill_influence(est, data, fit.pi, tau);
  complete(est, data);
  return est;
}

TmleState TmleState::from_fit(const NuisanceValues& fit, OutcomeKind kind) {
  if (!fit.has_pi() || !fit.has_q())
    throw Error(ErrorKind::precondition, "TMLE needs fitted pi and Q values");
  TmleState s;
  const std::size_t n = fit.pi.size();
  s.pi.resize(n);
  s.logit_pi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.pi[i] = clip_probability(fit.pi[i]);
    s.logit_pi[i] = logit(s.pi[i]);
  }
  s.q0 = fit.q0;
  s.q1 = fit.q1;
  if (kind == OutcomeKind::bounded) {
    s.logit_q0.resize(n);
    s.logit_q1.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.q0[i] = clip_probability(s.q0[i]);
      s.q1[i] = clip_probability(s.q1[i]);
      s.logit_q0[i] = logit(s.q0[i]);
      s.logit_q1[i] = logit(s.q1[i]);
    }
  }
  return s;
}

double fluctuate_pi(TmleState& state, const Dataset& data) {
  const std::size_t n = data.n();
  std::vector<double> h1(n);
  for (std::size_t i = 0; i < n; ++i)
    h1[i] = -2.0 * state.pi[i] * (state.q1[i] - state.q0[i]) - state.q0[i];
  const double eps = solve_offset_logistic(state.logit_pi, h1, data.exposure());
  if (eps != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      state.logit_pi[i] = clamp_logit(state.logit_pi[i] + eps * h1[i]);
    }
    std::vector<double> zero(n, 0.0);
    kernels::expit_shift(state.logit_pi, zero, 0.0, state.pi);
    for (double& p : state.pi) p = clip_probability(p);
  }
  state.eps1 = eps;
  return eps;
}

double fluctuate_q(TmleState& state, const Dataset& data) {
  const std::size_t n = data.n();
  const auto o = data.outcome();
  const auto e = data.exposure();
  std::vector<double> h2(n);
  for (std::size_t i = 0; i < n; ++i) h2[i] = -state.pi[i];

  double eps = 0.0;
  if (state.logit_q0.empty()) {
    double num = 0.0;
    const double den = kernels::dot(h2, h2);
    for (std::size_t i = 0; i < n; ++i)
      num += h2[i] * (o[i] - (e[i] == 1.0 ? state.q1[i] : state.q0[i]));
    if (den < 1e-14) {
      state.warnings.push_back("Q fluctuation skipped: clever covariate H2 vanishes");
    } else {
      eps = num / den;
      for (std::size_t i = 0; i < n; ++i) {
        state.q0[i] += eps * h2[i];
        state.q1[i] += eps * h2[i];
      }
    }
  } else {
    std::vector<double> offset(n);
    for (std::size_t i = 0; i < n; ++i)
      offset[i] = e[i] == 1.0 ? state.logit_q1[i] : state.logit_q0[i];
    eps = solve_offset_logistic(offset, h2, o);
    if (eps != 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        state.logit_q0[i] = clamp_logit(state.logit_q0[i] + eps * h2[i]);
        state.logit_q1[i] = clamp_logit(state.logit_q1[i] + eps * h2[i]);
      }
      std::vector<double> zero(n, 0.0);
      kernels::expit_shift(state.logit_q0, zero, 0.0, state.q0);
      kernels::expit_shift(state.logit_q1, zero, 0.0, state.q1);
      for (std::size_t i = 0; i < n; ++i) {
        state.q0[i] = clip_probability(state.q0[i]);
        state.q1[i] = clip_probability(state.q1[i]);
      }
    }
  }
  state.eps2 = eps;
  return eps;
}

ScoreEstimate tmle_theta(const Dataset& data, const NuisanceValues& fit,
                         const TmleOptions& options) {
  require_arms(data);
  const std::size_t n = data.n();
  require_size(fit.pi, n, "pi");
  require_size(fit.q0, n, "Q");
  TmleState state = TmleState::from_fit(fit, data.outcome_kind());

  ScoreEstimate est;
  est.kind = EstimatorKind::tmle;
  est.tmle.converged = false;
  for (int k = 0; k < options.max_iterations; ++k) {
    state.iteration = k;
    const double e1 = fluctuate_pi(state, data);
    const double e2 = fluctuate_q(state, data);
    state.trace.emplace_back(e1, e2);
    if (std::max(std::abs(e1), std::abs(e2)) < options.tolerance) {
      est.tmle.converged = true;
      break;
    }
  }
  est.tmle.iterations = est.tmle.converged ? state.iteration : options.max_iterations;
  est.tmle.eps1 = state.eps1;
  est.tmle.eps2 = state.eps2;
  est.tmle.trace = std::move(state.trace);
  est.warnings = std::move(state.warnings);
  if (!est.tmle.converged)
    est.warnings.push_back("TMLE did not converge in " + std::to_string(options.max_iterations) +
                           " iterations (|eps1| = " + std::to_string(std::abs(est.tmle.eps1)) +
                           ", |eps2| = " + std::to_string(std::abs(est.tmle.eps2)) + ")");

  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) tau[i] = compose_tau(state.pi[i], state.q0[i], state.q1[i]);
  // Substitution estimate under the empirical covariate distribution.
  est.theta = kernels::dot(state.pi, tau) / static_cast<double>(n);
  est.mu_o = data.outcome_mean();
  est.mu_e = data.exposure_rate();
  fill_influence(est, data, state.pi, tau);
  complete(est, data);
  return est;
}

ScoreEstimate constant_target_estimate(const Dataset& data, EstimatorKind kind) {
  require_arms(data);
  ScoreEstimate est;
  est.kind = kind;
  est.constant = true;
  est.mu_e = data.exposure_rate();
  est.mu_o = data.outcome_map().to_original(data.outcome_mean());
  est.theta = est.mu_o * est.mu_e;
  est.phi = 0.0;
  est.psi = 1.0;
  if (has_influence(kind)) {
    const std::vector<double> zero(data.n(), 0.0);
    est.ic.d_theta = est.ic.d_mu_o = est.ic.d_mu_e = est.ic.d_phi = est.ic.d_psi = zero;
  }
  return est;
}

void attach_inference(ScoreEstimate& est, double alpha, bool log_scale_psi) {
  if (est.ic.empty()) return;
  InferenceResult r;
  r.alpha = alpha;
  r.log_scale_psi = log_scale_psi;
  r.phi = wald_inference(est.ic.d_phi, est.phi, 0.0, alpha);
  if (est.psi && !est.ic.d_psi.empty()) {
    if (log_scale_psi && *est.psi > 0.0)
      r.psi = wald_inference_log(est.ic.d_psi, *est.psi, alpha);
    else
      r.psi = wald_inference(est.ic.d_psi, *est.psi, 1.0, alpha);
  }
  est.inference = r;
}

void back_transform(ScoreEstimate& est, const AffineMap& map) {
  const double s = map.scale;
  const double o = map.offset;
  est.theta = s * est.theta + o * est.mu_e;
  est.mu_o = s * est.mu_o + o;
  for (std::size_t i = 0; i < est.ic.d_theta.size(); ++i) {
    est.ic.d_theta[i] = s * est.ic.d_theta[i] + o * est.ic.d_mu_e[i];
    est.ic.d_mu_o[i] = s * est.ic.d_mu_o[i];
  }
  finish(est);
}

}  // namespace confscore
