#include "confscore/influence.hpp"

#include <cmath>
#include <string>

#include "confscore/error.hpp"
#include "confscore/kernels.hpp"

namespace confscore {

namespace {

void require_mu_e(double mu_e) {
  if (!(mu_e > 0.0 && mu_e < 1.0))
    throw Error(ErrorKind::domain,
                "mu_E must lie in (0, 1), got " + std::to_string(mu_e));
}

double sample_sd(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = kernels::sum(v) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

WaldResult wald(double estimate, double se, double null_value, double alpha) {
  WaldResult r;
  r.estimate = estimate;
  r.se = se;
  if (se == 0.0) {
    r.ci_lo = r.ci_hi = estimate;
    r.p_value = estimate == null_value ? 1.0 : 0.0;
    return r;
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);
  r.ci_lo = estimate - z * se;
  r.ci_hi = estimate + z * se;
  r.p_value = 2.0 * normal_cdf(-std::abs(estimate - null_value) / se);
  return r;
}

void require_inference_args(std::span<const double> ic, double alpha) {
  if (ic.size() < 2)
    throw Error(ErrorKind::precondition, "Wald inference needs at least 2 influence values");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::domain, "alpha must lie in (0, 1), got " + std::to_string(alpha));
}

}  // namespace

double eic_theta(double o, double e, double pi, double tau, double theta) {
  return o * pi + tau * (e - pi) - theta;
}

double ic_mu(double value, double mu) { return value - mu; }

double ic_phi(double d_theta, double d_mu_o, double d_mu_e, double theta,
              double mu_o, double mu_e) {
  require_mu_e(mu_e);
  const double q = 1.0 - mu_e;
  return d_theta / (mu_e * q) - d_mu_o / q -
         d_mu_e * (theta / (mu_e * mu_e) + (mu_o - theta) / (q * q));
}

std::optional<double> ic_psi(double d_theta, double d_mu_o, double d_mu_e,
                             double theta, double mu_o, double mu_e) {
  require_mu_e(mu_e);
  const double rest = mu_o - theta;
  if (std::abs(rest) < 1e-12 || theta <= 0.0) return std::nullopt;
  const double psi = (theta / mu_e) / (rest / (1.0 - mu_e));
  return psi * (mu_o * d_theta / (theta * rest) - d_mu_o / rest -
                d_mu_e / (mu_e * (1.0 - mu_e)));
}

double normal_cdf(double x) {
  const double a = std::abs(x);
  double tail;
  if (a > 37.0) {
    tail = 0.0;
  } else {
    const double g = kernels::exp_reference(-0.5 * a * a);
    if (a < 7.07106781186547) {
      double num = 3.52624965998911e-02 * a + 0.700383064443688;
      num = num * a + 6.37396220353165;
      num = num * a + 33.912866078383;
      num = num * a + 112.079291497871;
      num = num * a + 221.213596169931;
      num = num * a + 220.206867912376;
      double den = 8.83883476483184e-02 * a + 1.75566716318264;
      den = den * a + 16.064177579207;
      den = den * a + 86.7807322029461;
      den = den * a + 296.564248779674;
      den = den * a + 637.333633378831;
      den = den * a + 793.826512519948;
      den = den * a + 440.413735824752;
      tail = g * num / den;
    } else {
      double f = a + 0.65;
      f = a + 4.0 / f;
      f = a + 3.0 / f;
      f = a + 2.0 / f;
      f = a + 1.0 / f;
      tail = g / f / 2.506628274631;
    }
  }
  return x > 0.0 ? 1.0 - tail : tail;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorKind::domain, "normal quantile needs 0 < p < 1");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

WaldResult wald_inference(std::span<const double> ic, double estimate,
                          double null_value, double alpha) {
  require_inference_args(ic, alpha);
  const double se = sample_sd(ic) / std::sqrt(static_cast<double>(ic.size()));
  return wald(estimate, se, null_value, alpha);
}

WaldResult wald_inference_log(std::span<const double> ic_psi, double psi,
                              double alpha) {
  require_inference_args(ic_psi, alpha);
  if (!(psi > 0.0))
    throw Error(ErrorKind::domain, "log-scale inference needs psi > 0");
  const double se_log =
      sample_sd(ic_psi) / std::sqrt(static_cast<double>(ic_psi.size())) / psi;
  const WaldResult on_log = wald(std::log(psi), se_log, 0.0, alpha);
  WaldResult r;
  r.estimate = psi;
  r.se = psi * se_log;
  r.ci_lo = std::exp(on_log.ci_lo);
  r.ci_hi = std::exp(on_log.ci_hi);
  r.p_value = on_log.p_value;
  return r;
}

}  // namespace confscore
