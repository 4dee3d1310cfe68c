#pragma once
// Per-target fitting and estimation, run in parallel over targets.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "confscore/data.hpp"
#include "confscore/estimators.hpp"
#include "confscore/nuisance.hpp"
#include "confscore/ranking.hpp"

namespace confscore {

struct PipelineOptions {
  EstimatorKind estimator = EstimatorKind::tmle;
  BasisConfig basis;
  /// Per-level means instead of polynomial fits (discrete targets).
  bool saturated = false;
  DrOptions dr;
  TmleOptions tmle;
  /// Significance level used for the attached Wald inference.
  double alpha = 0.10;
  bool log_scale_psi = false;
  /// Keep the per-observation influence values in the returned estimates.
  bool keep_influence = false;
  unsigned threads = 1;
};

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index
/// is visited exactly once; work is claimed dynamically.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

ScoreEstimate estimate_target(const Dataset& data, const Target& target,
                              const PipelineOptions& options);

/// Estimates in target order, independent of the thread count.
std::vector<ScoreEstimate> score_targets(const Dataset& data,
                                         std::span<const Target> targets,
                                         const PipelineOptions& options);

RankingReport rank_targets(const Dataset& data, std::span<const Target> targets,
                           const PipelineOptions& options, ScoreKind score_kind,
                           const SelectionRule& rule);

RankingReport rank_groups(const Dataset& data, const GroupSpec& groups,
                          const PipelineOptions& options, ScoreKind score_kind,
                          const SelectionRule& rule);

}  // namespace confscore
