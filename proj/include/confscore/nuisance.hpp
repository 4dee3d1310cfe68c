#pragma once
// Nuisance functions for one target (covariate or group):
//   tau(c)   = E(O | C = c)                 outcome regression
//   pi(c)    = Pr(E = 1 | C = c)            propensity
//   Q(e, c)  = E(O | E = e, C = c)          adjusted exposure-response model
//
// Estimators only consume NuisanceValues (fitted values at the data rows),
// so any learner that can produce them plugs in through NuisanceModel.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confscore/data.hpp"

namespace confscore {

/// Lower/upper clip applied to propensities and bounded-outcome Q values.
inline constexpr double kProbabilityClip = 1e-6;

double clip_probability(double p);

struct BasisConfig {
  int degree = 3;
  bool include_intercept = true;
  /// Adds pairwise products of standardized members (groups only).
  bool interactions = false;

  void validate() const;
};

/// Raw powers 1..degree of each standardized member plus an intercept.
/// Constant members contribute no columns.
class PolynomialBasis {
 public:
  static PolynomialBasis build(const Dataset& data, const Target& target,
                               const BasisConfig& config);

  std::size_t size() const { return size_; }
  std::size_t members() const { return means_.size(); }
  const BasisConfig& config() const { return config_; }
  bool all_constant() const;

  /// Expands raw member values (one per member, in target order).
  void expand(std::span<const double> raw, std::span<double> out) const;
  Eigen::MatrixXd design(const Dataset& data, const Target& target) const;

 private:
  BasisConfig config_;
  std::vector<double> means_;
  std::vector<double> sds_;
  std::vector<bool> constant_;
  std::size_t size_ = 0;
};

struct NuisanceValues {
  std::vector<double> tau;
  std::vector<double> pi;
  std::vector<double> q0;
  std::vector<double> q1;

  bool has_tau() const { return !tau.empty(); }
  bool has_pi() const { return !pi.empty(); }
  bool has_q() const { return !q0.empty(); }
};

class NuisanceModel {
 public:
  virtual ~NuisanceModel() = default;

  virtual bool has_tau() const = 0;
  virtual bool has_pi() const = 0;
  virtual bool has_q() const = 0;

  virtual double tau(std::span<const double> c) const = 0;
  /// Clipped into [kProbabilityClip, 1 - kProbabilityClip].
  virtual double pi(std::span<const double> c) const = 0;
  virtual double q(int arm, std::span<const double> c) const = 0;

  /// Fitted values at every data row. The default evaluates point by point.
  virtual NuisanceValues values_at(const Dataset& data, const Target& target) const;

  const std::vector<std::string>& warnings() const { return warnings_; }

 protected:
  std::vector<std::string> warnings_;
};

/// pi * q1 + (1 - pi) * q0
double compose_tau(double pi, double q0, double q1);
double compose_tau(const NuisanceModel& model, std::span<const double> c);

/// Polynomial-basis fit. Parts that were not requested stay empty.
class NuisanceFit : public NuisanceModel {
 public:
  NuisanceFit(PolynomialBasis basis, OutcomeKind kind)
      : basis_(std::move(basis)), kind_(kind) {}

  bool has_tau() const override { return tau_.has_value(); }
  bool has_pi() const override { return pi_.has_value(); }
  bool has_q() const override { return q0_.has_value(); }

  double tau(std::span<const double> c) const override;
  double pi(std::span<const double> c) const override;
  double q(int arm, std::span<const double> c) const override;
  NuisanceValues values_at(const Dataset& data, const Target& target) const override;

  const PolynomialBasis& basis() const { return basis_; }
  const std::optional<Eigen::VectorXd>& tau_coeffs() const { return tau_; }
  const std::optional<Eigen::VectorXd>& pi_coeffs() const { return pi_; }
  const std::optional<Eigen::VectorXd>& q0_coeffs() const { return q0_; }
  const std::optional<Eigen::VectorXd>& q1_coeffs() const { return q1_; }

  /// Copies the parts present in `other` (same basis) into this fit.
  void absorb(const NuisanceFit& other);

 private:
  friend NuisanceFit fit_nuisance(const Dataset&, const Target&,
                                  const BasisConfig&, bool, bool, bool);

  PolynomialBasis basis_;
  OutcomeKind kind_;
  std::optional<Eigen::VectorXd> tau_, pi_, q0_, q1_;
};

/// Least squares of O on the basis.
NuisanceFit fit_tau(const Dataset& data, const Target& target, const BasisConfig& basis);
/// Logistic regression of E on the basis (IRLS).
NuisanceFit fit_pi(const Dataset& data, const Target& target, const BasisConfig& basis);
/// Per-arm regressions of O: least squares, or logistic IRLS when bounded.
NuisanceFit fit_q(const Dataset& data, const Target& target, const BasisConfig& basis);
/// Any combination of parts sharing one basis and design matrix.
NuisanceFit fit_nuisance(const Dataset& data, const Target& target,
                         const BasisConfig& basis, bool tau, bool pi, bool q);

/// Per-level empirical conditional means for discrete targets (<= 64 levels).
/// Q at a level with no observations in an arm falls back to tau(level).
class SaturatedFit : public NuisanceModel {
 public:
  static constexpr std::size_t kMaxLevels = 64;

  bool has_tau() const override { return true; }
  bool has_pi() const override { return true; }
  bool has_q() const override { return true; }

  double tau(std::span<const double> c) const override;
  double pi(std::span<const double> c) const override;
  double q(int arm, std::span<const double> c) const override;

  std::size_t levels() const { return cells_.size(); }

 private:
  friend SaturatedFit fit_saturated(const Dataset&, const Target&);

  struct Cell {
    double count = 0, treated = 0, sum_o = 0, sum_o_treated = 0;
  };
  const Cell& cell(std::span<const double> c) const;

  std::map<std::vector<double>, Cell> cells_;
  OutcomeKind kind_ = OutcomeKind::continuous;
};

SaturatedFit fit_saturated(const Dataset& data, const Target& target);

/// Member values of row i, in target order.
void row_values(const Dataset& data, const Target& target, std::size_t i,
                std::vector<double>& out);

}  // namespace confscore
