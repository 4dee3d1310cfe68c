#include "confscore/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "confscore/error.hpp"

namespace confscore {

std::string_view score_kind_name(ScoreKind kind) {
  return kind == ScoreKind::ratio ? "ratio" : "difference";
}

ScoreKind parse_score_kind(std::string_view text) {
  if (text == "difference") return ScoreKind::difference;
  if (text == "ratio") return ScoreKind::ratio;
  throw Error(ErrorKind::config,
              "unknown score '" + std::string(text) + "' (expected difference or ratio)");
}

double null_value(ScoreKind kind) { return kind == ScoreKind::ratio ? 1.0 : 0.0; }

RankingReport rank(std::span<const ScoreEstimate> estimates, ScoreKind kind) {
  if (estimates.empty()) throw Error(ErrorKind::precondition, "nothing to rank");
  RankingReport report;
  report.score_kind = kind;
  report.estimator = estimates.front().kind;
  report.rows.reserve(estimates.size());
  for (const ScoreEstimate& est : estimates) {
    if (est.kind != report.estimator)
      throw Error(ErrorKind::precondition, "estimates to rank mix estimator kinds");
    ReportRow row;
    row.id = est.id;
    row.name = est.name;
    row.theta = est.theta;
    row.mu_o = est.mu_o;
    row.mu_e = est.mu_e;
    row.inference = est.inference;
    row.tmle = est.tmle;
    row.tmle.trace.clear();
    row.phi = est.phi;
    row.psi = est.psi;
    row.constant = est.constant;
    row.warnings = est.warnings;
    row.score = kind == ScoreKind::ratio ? est.psi : std::optional<double>(est.phi);
    if (row.score) row.distance = std::abs(*row.score - null_value(kind));
    if (est.inference) {
      row.se_phi = est.inference->phi.se;
      if (kind == ScoreKind::difference)
        row.test = est.inference->phi;
      else
        row.test = est.inference->psi;
    }
    if (kind == ScoreKind::ratio && !row.score)
      row.warnings.push_back("ratio score undefined (mu_O - theta vanishes)");
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) {
                     if (a.score.has_value() != b.score.has_value()) return a.score.has_value();
                     if (a.score && a.distance != b.distance) return a.distance > b.distance;
                     return a.id < b.id;
                   });
  for (std::size_t r = 0; r < report.rows.size(); ++r) report.rows[r].rank = r + 1;
  return report;
}

void select_top_k(RankingReport& report, std::size_t k) {
  if (k < 1 || k > report.rows.size())
    throw Error(ErrorKind::config, "top-k must lie in [1, " +
                                       std::to_string(report.rows.size()) + "], got " +
                                       std::to_string(k));
  for (auto& row : report.rows) row.selected = row.rank <= k;
  report.rule = SelectionRule::top(k);
}

void select_by_test(RankingReport& report, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::config, "alpha must lie in (0, 1)");
  if (!has_influence(report.estimator))
    throw Error(ErrorKind::unsupported,
                "test-based selection needs an estimator with influence curves (dr or tmle)");
  for (auto& row : report.rows) row.selected = row.test && row.test->p_value < alpha;
  report.rule = SelectionRule::test(alpha);
}

void apply_rule(RankingReport& report, const SelectionRule& rule) {
  switch (rule.kind) {
    case SelectionRule::Kind::none:
      for (auto& row : report.rows) row.selected = false;
      report.rule = rule;
      break;
    case SelectionRule::Kind::top_k: select_top_k(report, rule.k); break;
    case SelectionRule::Kind::alpha_test: select_by_test(report, rule.alpha); break;
  }
}

std::vector<std::size_t> selected_ids(const RankingReport& report) {
  std::vector<std::size_t> ids;
  for (const auto& row : report.rows)
    if (row.selected) ids.push_back(row.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace confscore
