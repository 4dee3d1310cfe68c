#pragma once
// Command-line front end: score, rank and simulate subcommands.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "confscore/pipeline.hpp"
#include "confscore/ranking.hpp"
#include "confscore/simulation.hpp"

namespace confscore::cli {

inline constexpr const char* kReportSchema = "confscore.report/1";
inline constexpr const char* kSimulationSchema = "confscore.simulation/1";
inline constexpr const char* kVersion = "0.1.0";

enum class Format { json, csv };

struct RunConfig {
  std::string subcommand;
  std::string data_path;
  std::string groups_path;
  std::string scenario_path;
  std::string outcome_column = "outcome";
  std::string exposure_column = "exposure";
  OutcomeKind outcome_kind = OutcomeKind::continuous;
  EstimatorKind estimator = EstimatorKind::tmle;
  ScoreKind score_kind = ScoreKind::difference;
  int degree = 3;
  bool interactions = false;
  bool saturated = false;
  bool compose_tau = false;
  bool log_scale_psi = false;
  /// Significance level; intervals have confidence 1 - alpha.
  double alpha = 0.10;
  bool alpha_given = false;
  std::optional<std::size_t> top_k;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::size_t oracle_mc = 200'000;
  unsigned threads = 1;
  std::string out_path;
  Format format = Format::json;
};

/// Parses and runs; returns the process exit code (0 ok, 2 invalid input,
/// 1 internal failure). Diagnostics go to `err`, reports without --out to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string render_report_csv(const RankingReport& report, bool rank_order);
std::string render_report_json(const RankingReport& report, const RunConfig& config,
                               bool rank_order);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace confscore::cli
