#pragma once
// Influence curves of theta, mu_O, mu_E and of the scores derived from them,
// plus Wald inference built on those curves.

#include <optional>
#include <span>

namespace confscore {

/// Efficient influence curve of theta = E[I(E=1) tau(C)]:
///   o * pi + tau * (I(e=1) - pi) - theta
double eic_theta(double o, double e, double pi, double tau, double theta);

/// value - mu; gives D_muO with value = o and D_muE with value = I(e=1).
double ic_mu(double value, double mu);

/// Chain rule of phi = theta/mu_E - (mu_O - theta)/(1 - mu_E).
/// Throws a domain Error unless 0 < mu_e < 1.
double ic_phi(double d_theta, double d_mu_o, double d_mu_e, double theta,
              double mu_o, double mu_e);

/// Chain rule of psi = [theta/mu_E] / [(mu_O - theta)/(1 - mu_E)], taken
/// through log psi. Empty when psi is undefined or theta <= 0.
std::optional<double> ic_psi(double d_theta, double d_mu_o, double d_mu_e,
                             double theta, double mu_o, double mu_e);

/// Standard normal CDF (Hart's rational approximation, double precision).
double normal_cdf(double x);
/// Standard normal quantile (Wichura's AS241 PPND16). 0 < p < 1.
double normal_quantile(double p);

struct WaldResult {
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_value = 1.0;
};

/// se = sd(ic, n - 1) / sqrt(n); CI = estimate -/+ z_{1-alpha/2} se;
/// two-sided p-value against null_value. A zero-variance curve gives a point
/// CI and p = (estimate == null_value ? 1 : 0).
WaldResult wald_inference(std::span<const double> ic, double estimate,
                          double null_value, double alpha);

/// Wald inference for psi on the log scale: CI = exp(log psi -/+ z se_log),
/// test of log psi = 0. Reported se is the delta-method se on the natural
/// scale (psi * se_log). Requires psi > 0.
WaldResult wald_inference_log(std::span<const double> ic_psi, double psi,
                              double alpha);

struct InferenceResult {
  double alpha = 0.1;
  WaldResult phi;
  std::optional<WaldResult> psi;
  bool log_scale_psi = false;
};

}  // namespace confscore
