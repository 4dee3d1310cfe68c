#pragma once
// Ranking of targets by |phi| or |psi - 1| and selection of a confounder set.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confscore/estimators.hpp"

namespace confscore {

enum class ScoreKind { difference, ratio };

std::string_view score_kind_name(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view text);
/// 0 for the difference score, 1 for the ratio score.
double null_value(ScoreKind kind);

struct SelectionRule {
  enum class Kind { none, top_k, alpha_test };
  Kind kind = Kind::none;
  std::size_t k = 0;
  double alpha = 0.0;

  static SelectionRule top(std::size_t k) { return {Kind::top_k, k, 0.0}; }
  static SelectionRule test(double alpha) { return {Kind::alpha_test, 0, alpha}; }
};

struct ReportRow {
  std::size_t id = 0;  // 0-based target index
  std::string name;
  double theta = 0.0;
  double mu_o = 0.0;
  double mu_e = 0.0;
  double phi = 0.0;
  std::optional<double> psi;
  /// Score used for ranking (phi or psi); empty when psi is undefined.
  std::optional<double> score;
  /// |score - null|; undefined scores sort after every defined one.
  double distance = 0.0;
  std::optional<double> se_phi;
  /// Inference for the ranked score kind.
  std::optional<WaldResult> test;
  std::optional<InferenceResult> inference;
  TmleDiagnostics tmle;
  bool constant = false;
  bool selected = false;
  std::size_t rank = 0;  // 1-based
  std::vector<std::string> warnings;
};

struct RankingReport {
  ScoreKind score_kind = ScoreKind::difference;
  EstimatorKind estimator = EstimatorKind::tmle;
  SelectionRule rule;
  std::vector<ReportRow> rows;  // in rank order
};

/// Sorts by |score - null| descending, ties by ascending id; undefined
/// ratio scores go last. Throws on empty input or mixed estimator kinds.
RankingReport rank(std::span<const ScoreEstimate> estimates, ScoreKind kind);

/// Marks exactly the first k rows. Requires 1 <= k <= rows.
void select_top_k(RankingReport& report, std::size_t k);
/// Marks rows with p < alpha. Requires estimates with inference.
void select_by_test(RankingReport& report, double alpha);
void apply_rule(RankingReport& report, const SelectionRule& rule);

/// Ids (0-based) of the selected rows, ascending.
std::vector<std::size_t> selected_ids(const RankingReport& report);

}  // namespace confscore
