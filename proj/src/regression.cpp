#include "confscore/regression.hpp"

#include <cmath>

#include "confscore/kernels.hpp"

namespace confscore {

namespace {

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            double lambda) {
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += lambda;
  return gram.ldlt().solve(x.transpose() * y);
}

struct LogisticObjective {
  const Eigen::MatrixXd& x;
  std::span<const double> y;
  Eigen::VectorXd penalty_mask;  // 1 for penalized coefficients
  double penalty;
  std::vector<double> zeros;
  std::vector<double> eta;

  double value(const Eigen::VectorXd& beta) {
    Eigen::Map<Eigen::VectorXd>(eta.data(), eta.size()) = x * beta;
    const auto sums = kernels::logistic_path(eta, zeros, y, 0.0);
    const double pen =
        0.5 * penalty * (penalty_mask.array() * beta.array().square()).sum();
    return sums.loss + pen;
  }
};

}  // namespace

RegressionResult least_squares(const Eigen::MatrixXd& x,
                               std::span<const double> y) {
  RegressionResult out;
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() == x.cols()) {
    out.coefficients = qr.solve(yv);
    return out;
  }
  const double k = static_cast<double>(x.cols());
  const double trace = x.colwise().squaredNorm().sum();
  const double lambda = 1e-8 * trace / k;
  out.coefficients = ridge_solve(x, yv, lambda);
  out.regularized = true;
  out.warnings.push_back("rank-deficient least-squares design (rank " +
                         std::to_string(qr.rank()) + " of " +
                         std::to_string(x.cols()) + "); ridge fallback used");
  return out;
}

RegressionResult logistic_regression_penalized(const Eigen::MatrixXd& x,
                                               std::span<const double> y,
                                               double penalty, bool intercept,
                                               const LogisticOptions& options) {
  const auto n = x.rows();
  const auto k = x.cols();
  LogisticObjective obj{x, y, Eigen::VectorXd::Ones(k), penalty,
                        std::vector<double>(static_cast<std::size_t>(n), 0.0),
                        std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  if (intercept && k > 0) obj.penalty_mask(0) = 0.0;

  RegressionResult out;
  out.converged = false;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double loss = obj.value(beta);
  std::vector<double> prob(static_cast<std::size_t>(n));
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    kernels::expit_shift(obj.eta, obj.zeros, 0.0, prob);
    const Eigen::Map<const Eigen::VectorXd> p(prob.data(), n);
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    Eigen::VectorXd grad = x.transpose() * (yv - p);
    grad.array() -= penalty * obj.penalty_mask.array() * beta.array();
    Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x;
    hess.diagonal().array() += penalty * obj.penalty_mask.array();

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive())
      step = ldlt.solve(grad);
    else
      step = hess.colPivHouseholderQr().solve(grad);
    if (!step.allFinite()) break;

    double t = 1.0;
    double new_loss = loss;
    Eigen::VectorXd candidate = beta;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      candidate = beta + t * step;
      new_loss = obj.value(candidate);
      if (std::isfinite(new_loss) && new_loss <= loss) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      // no representable descent left: already at the optimum
      obj.value(beta);
      out.converged = true;
      break;
    }
    const double gain = loss - new_loss;
    beta = candidate;
    loss = new_loss;
    if (gain < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.coefficients = beta;
  return out;
}

RegressionResult logistic_regression(const Eigen::MatrixXd& x,
                                     std::span<const double> y, bool intercept,
                                     const LogisticOptions& options) {
  const auto separated = [&](const RegressionResult& r) {
    if (!r.converged) return true;
    const Eigen::VectorXd eta = x * r.coefficients;
    return !eta.allFinite() || eta.cwiseAbs().maxCoeff() > options.max_abs_logit;
  };

  RegressionResult fit = logistic_regression_penalized(x, y, 0.0, intercept, options);
  if (!separated(fit)) return fit;

  const double k = static_cast<double>(x.cols());
  const double scale = x.colwise().squaredNorm().sum() / k;
  double penalty = 1e-6 * scale;
  for (int attempt = 0; attempt < 6; ++attempt, penalty *= 100.0) {
    RegressionResult ridge =
        logistic_regression_penalized(x, y, penalty, intercept, options);
    if (!separated(ridge) || attempt == 5) {
      ridge.regularized = true;
      ridge.warnings.push_back(
          "logistic fit separated or did not converge; ridge penalty " +
          std::to_string(penalty) + " applied");
      return ridge;
    }
  }
  return fit;
}

}  // namespace confscore
