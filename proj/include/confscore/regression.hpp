#pragma once
// Least-squares and logistic regression solvers used by the nuisance fits.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace confscore {

struct RegressionResult {
  Eigen::VectorXd coefficients;
  bool regularized = false;
  bool converged = true;
  int iterations = 0;
  std::vector<std::string> warnings;
};

/// Column-pivoted QR least squares. A rank-deficient design falls back to
/// ridge with penalty 1e-8 * trace(X'X) / k.
RegressionResult least_squares(const Eigen::MatrixXd& x,
                               std::span<const double> y);

struct LogisticOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;  // on the total log-likelihood improvement
  /// Largest |X beta| accepted before the fit is treated as separated.
  double max_abs_logit = 35.0;
};

/// Logistic maximum likelihood by Newton/IRLS with step halving. Responses
/// may be fractional in [0, 1]. Column 0 is treated as the unpenalized
/// intercept when `intercept` is set. Separation (non-convergence or
/// runaway logits) triggers an escalating ridge refit with a warning.
RegressionResult logistic_regression(const Eigen::MatrixXd& x,
                                     std::span<const double> y,
                                     bool intercept = true,
                                     const LogisticOptions& options = {});

/// Fixed-penalty variant; `penalty` multiplies the non-intercept squared
/// coefficients (times 1/2) in the objective.
RegressionResult logistic_regression_penalized(const Eigen::MatrixXd& x,
                                               std::span<const double> y,
                                               double penalty, bool intercept,
                                               const LogisticOptions& options);

}  // namespace confscore
