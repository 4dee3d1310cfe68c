#include "confscore/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "confscore/error.hpp"

namespace confscore {

namespace {

bool all_members_constant(const Dataset& data, const Target& target) {
  for (std::size_t col : target.columns)
    if (!standardize(data.column(col)).constant) return false;
  return true;
}

}  // namespace

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

ScoreEstimate estimate_target(const Dataset& data, const Target& target,
                              const PipelineOptions& options) {
  ScoreEstimate est;
  std::vector<std::string> fit_warnings;
  if (all_members_constant(data, target)) {
    est = constant_target_estimate(data, options.estimator);
  } else {
    NuisanceValues values;
    if (options.saturated) {
      const SaturatedFit fit = fit_saturated(data, target);
      values = fit.values_at(data, target);
    } else {
      const bool need_tau = options.estimator == EstimatorKind::plugin_om ||
                            (options.estimator == EstimatorKind::dr && !options.dr.compose_tau);
      const bool need_pi = options.estimator != EstimatorKind::plugin_om;
      const bool need_q = options.estimator == EstimatorKind::tmle ||
                          (options.estimator == EstimatorKind::dr && options.dr.compose_tau);
      const NuisanceFit fit =
          fit_nuisance(data, target, options.basis, need_tau, need_pi, need_q);
      values = fit.values_at(data, target);
      fit_warnings = fit.warnings();
    }
    switch (options.estimator) {
      case EstimatorKind::plugin_om: est = plugin_scores_om(data, values); break;
      case EstimatorKind::plugin_ps: est = plugin_scores_ps(data, values); break;
      case EstimatorKind::dr: est = theta_dr(data, values, options.dr); break;
      case EstimatorKind::tmle: est = tmle_theta(data, values, options.tmle); break;
    }
  }
  est.id = target.index;
  est.name = target.name;
  fit_warnings.insert(fit_warnings.end(), est.warnings.begin(), est.warnings.end());
  est.warnings = std::move(fit_warnings);
  attach_inference(est, options.alpha, options.log_scale_psi);
  if (!options.keep_influence) est.ic = {};
  return est;
}

std::vector<ScoreEstimate> score_targets(const Dataset& data,
                                         std::span<const Target> targets,
                                         const PipelineOptions& options) {
  options.basis.validate();
  std::vector<ScoreEstimate> out(targets.size());
  parallel_for(targets.size(), options.threads, [&](std::size_t i) {
    out[i] = estimate_target(data, targets[i], options);
  });
  return out;
}

RankingReport rank_targets(const Dataset& data, std::span<const Target> targets,
                           const PipelineOptions& options, ScoreKind score_kind,
                           const SelectionRule& rule) {
  const auto estimates = score_targets(data, targets, options);
  RankingReport report = rank(estimates, score_kind);
  apply_rule(report, rule);
  return report;
}

RankingReport rank_groups(const Dataset& data, const GroupSpec& groups,
                          const PipelineOptions& options, ScoreKind score_kind,
                          const SelectionRule& rule) {
  return rank_targets(data, groups.groups, options, score_kind, rule);
}

}  // namespace confscore
