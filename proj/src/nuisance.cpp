#include "confscore/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include "confscore/error.hpp"
#include "confscore/kernels.hpp"
#include "confscore/regression.hpp"

namespace confscore {

namespace {

double expit(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                    : std::exp(eta) / (1.0 + std::exp(eta));
}

double eval(const Eigen::VectorXd& coeffs, std::span<const double> features) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < coeffs.size(); ++k)
    acc += coeffs(k) * features[static_cast<std::size_t>(k)];
  return acc;
}

std::vector<double> fitted(const Eigen::MatrixXd& x, const Eigen::VectorXd& coeffs) {
  const Eigen::VectorXd v = x * coeffs;
  return {v.data(), v.data() + v.size()};
}

}  // namespace

double clip_probability(double p) {
  return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
}

void BasisConfig::validate() const {
  if (degree < 1 || degree > 12)
    throw Error(ErrorKind::config,
                "basis degree must lie in [1, 12], got " + std::to_string(degree));
}

PolynomialBasis PolynomialBasis::build(const Dataset& data, const Target& target,
                                       const BasisConfig& config) {
  config.validate();
  PolynomialBasis b;
  b.config_ = config;
  std::size_t active = 0;
  for (std::size_t col : target.columns) {
    const Standardized s = standardize(data.column(col));
    b.means_.push_back(s.mean);
    b.sds_.push_back(s.sd);
    b.constant_.push_back(s.constant);
    if (!s.constant) ++active;
  }
  b.size_ = (config.include_intercept ? 1 : 0) +
            active * static_cast<std::size_t>(config.degree) +
            (config.interactions ? active * (active - (active > 0 ? 1 : 0)) / 2 : 0);
  if (b.size_ == 0)
    throw Error(ErrorKind::precondition,
                "basis for '" + target.name + "' is empty (constant members, no intercept)");
  return b;
}

bool PolynomialBasis::all_constant() const {
  return std::all_of(constant_.begin(), constant_.end(), [](bool c) { return c; });
}

void PolynomialBasis::expand(std::span<const double> raw, std::span<double> out) const {
  std::size_t k = 0;
  if (config_.include_intercept) out[k++] = 1.0;
  for (std::size_t m = 0; m < means_.size(); ++m) {
    if (constant_[m]) continue;
    const double z = (raw[m] - means_[m]) / sds_[m];
    double power = 1.0;
    for (int d = 0; d < config_.degree; ++d) {
      power *= z;
      out[k++] = power;
    }
  }
  if (config_.interactions) {
    for (std::size_t a = 0; a < means_.size(); ++a) {
      if (constant_[a]) continue;
      for (std::size_t b = a + 1; b < means_.size(); ++b) {
        if (constant_[b]) continue;
        out[k++] = ((raw[a] - means_[a]) / sds_[a]) * ((raw[b] - means_[b]) / sds_[b]);
      }
    }
  }
}

Eigen::MatrixXd PolynomialBasis::design(const Dataset& data, const Target& target) const {
  const std::size_t n = data.n();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(size_));
  std::vector<double> raw(target.columns.size());
  std::vector<double> row(size_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < raw.size(); ++m) raw[m] = data.column(target.columns[m])[i];
    expand(raw, row);
    for (std::size_t k = 0; k < size_; ++k)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
  }
  return x;
}

void row_values(const Dataset& data, const Target& target, std::size_t i,
                std::vector<double>& out) {
  out.resize(target.columns.size());
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = data.column(target.columns[m])[i];
}

NuisanceValues NuisanceModel::values_at(const Dataset& data, const Target& target) const {
  NuisanceValues v;
  const std::size_t n = data.n();
  if (has_tau()) v.tau.resize(n);
  if (has_pi()) v.pi.resize(n);
  if (has_q()) {
    v.q0.resize(n);
    v.q1.resize(n);
  }
  std::vector<double> c;
  for (std::size_t i = 0; i < n; ++i) {
    row_values(data, target, i, c);
    if (has_tau()) v.tau[i] = tau(c);
    if (has_pi()) v.pi[i] = pi(c);
    if (has_q()) {
      v.q0[i] = q(0, c);
      v.q1[i] = q(1, c);
    }
  }
  return v;
}

double compose_tau(double pi, double q0, double q1) {
  return pi * q1 + (1.0 - pi) * q0;
}

double compose_tau(const NuisanceModel& model, std::span<const double> c) {
  if (!model.has_pi() || !model.has_q())
    throw Error(ErrorKind::precondition, "compose_tau needs pi and Q parts");
  return compose_tau(model.pi(c), model.q(0, c), model.q(1, c));
}

double NuisanceFit::tau(std::span<const double> c) const {
  if (!tau_) throw Error(ErrorKind::precondition, "fit has no tau part");
  std::vector<double> f(basis_.size());
  basis_.expand(c, f);
  return eval(*tau_, f);
}

double NuisanceFit::pi(std::span<const double> c) const {
  if (!pi_) throw Error(ErrorKind::precondition, "fit has no pi part");
  std::vector<double> f(basis_.size());
  basis_.expand(c, f);
  return clip_probability(expit(eval(*pi_, f)));
}

double NuisanceFit::q(int arm, std::span<const double> c) const {
  if (!q0_) throw Error(ErrorKind::precondition, "fit has no Q part");
  std::vector<double> f(basis_.size());
  basis_.expand(c, f);
  const double v = eval(arm == 1 ? *q1_ : *q0_, f);
  return kind_ == OutcomeKind::bounded ? clip_probability(expit(v)) : v;
}

NuisanceValues NuisanceFit::values_at(const Dataset& data, const Target& target) const {
  const Eigen::MatrixXd x = basis_.design(data, target);
  NuisanceValues v;
  if (tau_) v.tau = fitted(x, *tau_);
  if (pi_) {
    v.pi = fitted(x, *pi_);
    for (double& p : v.pi) p = clip_probability(expit(p));
  }
  if (q0_) {
    v.q0 = fitted(x, *q0_);
    v.q1 = fitted(x, *q1_);
    if (kind_ == OutcomeKind::bounded) {
      for (double& q : v.q0) q = clip_probability(expit(q));
      for (double& q : v.q1) q = clip_probability(expit(q));
    }
  }
  return v;
}

void NuisanceFit::absorb(const NuisanceFit& other) {
  if (other.basis_.size() != basis_.size())
    throw Error(ErrorKind::precondition, "cannot merge fits with different bases");
  if (other.tau_) tau_ = other.tau_;
  if (other.pi_) pi_ = other.pi_;
  if (other.q0_) {
    q0_ = other.q0_;
    q1_ = other.q1_;
  }
  warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
}

NuisanceFit fit_nuisance(const Dataset& data, const Target& target,
                         const BasisConfig& config, bool tau, bool pi, bool q) {
  PolynomialBasis basis = PolynomialBasis::build(data, target, config);
  const Eigen::MatrixXd x = basis.design(data, target);
  NuisanceFit fit(std::move(basis), data.outcome_kind());
  const auto note = [&](const RegressionResult& r, const char* part) {
    for (const auto& w : r.warnings) fit.warnings_.push_back(std::string(part) + ": " + w);
  };

  if (tau) {
    auto r = least_squares(x, data.outcome());
    note(r, "tau");
    fit.tau_ = std::move(r.coefficients);
  }
  if (pi) {
    auto r = logistic_regression(x, data.exposure(), config.include_intercept);
    note(r, "pi");
    fit.pi_ = std::move(r.coefficients);
  }
  if (q) {
    const std::size_t need = fit.basis_.size() + 1;
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<Eigen::Index> rows;
      for (std::size_t i = 0; i < data.n(); ++i)
        if (static_cast<int>(data.exposure()[i]) == arm)
          rows.push_back(static_cast<Eigen::Index>(i));
      if (rows.size() < need)
        throw Error(ErrorKind::precondition,
                    "arm E=" + std::to_string(arm) + " has " + std::to_string(rows.size()) +
                        " observations; Q fit for '" + target.name + "' needs at least " +
                        std::to_string(need));
      Eigen::MatrixXd xa(static_cast<Eigen::Index>(rows.size()), x.cols());
      std::vector<double> ya(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        xa.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
        ya[r] = data.outcome()[static_cast<std::size_t>(rows[r])];
      }
      RegressionResult r = data.outcome_kind() == OutcomeKind::bounded
                               ? logistic_regression(xa, ya, config.include_intercept)
                               : least_squares(xa, ya);
      note(r, arm == 0 ? "q0" : "q1");
      (arm == 0 ? fit.q0_ : fit.q1_) = std::move(r.coefficients);
    }
  }
  return fit;
}

NuisanceFit fit_tau(const Dataset& data, const Target& target, const BasisConfig& basis) {
  return fit_nuisance(data, target, basis, true, false, false);
}

NuisanceFit fit_pi(const Dataset& data, const Target& target, const BasisConfig& basis) {
  return fit_nuisance(data, target, basis, false, true, false);
}

NuisanceFit fit_q(const Dataset& data, const Target& target, const BasisConfig& basis) {
  return fit_nuisance(data, target, basis, false, false, true);
}

const SaturatedFit::Cell& SaturatedFit::cell(std::span<const double> c) const {
  const auto it = cells_.find(std::vector<double>(c.begin(), c.end()));
  if (it == cells_.end())
    throw Error(ErrorKind::domain, "saturated fit evaluated at an unseen level");
  return it->second;
}

double SaturatedFit::tau(std::span<const double> c) const {
  const Cell& k = cell(c);
  return k.sum_o / k.count;
}

double SaturatedFit::pi(std::span<const double> c) const {
  const Cell& k = cell(c);
  return clip_probability(k.treated / k.count);
}

double SaturatedFit::q(int arm, std::span<const double> c) const {
  const Cell& k = cell(c);
  const double count = arm == 1 ? k.treated : k.count - k.treated;
  const double sum = arm == 1 ? k.sum_o_treated : k.sum_o - k.sum_o_treated;
  const double v = count > 0 ? sum / count : k.sum_o / k.count;
  return kind_ == OutcomeKind::bounded ? clip_probability(v) : v;
}

SaturatedFit fit_saturated(const Dataset& data, const Target& target) {
  SaturatedFit fit;
  fit.kind_ = data.outcome_kind();
  std::vector<double> c;
  for (std::size_t i = 0; i < data.n(); ++i) {
    row_values(data, target, i, c);
    auto& cell = fit.cells_[c];
    if (fit.cells_.size() > SaturatedFit::kMaxLevels)
      throw Error(ErrorKind::precondition,
                  "'" + target.name + "' has more than 64 distinct levels; saturated fit unavailable");
    const double o = data.outcome()[i];
    const double e = data.exposure()[i];
    cell.count += 1.0;
    cell.treated += e;
    cell.sum_o += o;
    cell.sum_o_treated += e * o;
  }
  return fit;
}

}  // namespace confscore
