#pragma once
// Analysis dataset: outcome O, binary exposure E and covariates C_1..C_p,
// plus covariate group definitions.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace confscore {

enum class OutcomeKind { continuous, bounded };

std::string_view outcome_kind_name(OutcomeKind kind);
OutcomeKind parse_outcome_kind(std::string_view text);

/// original = scale * stored + offset
struct AffineMap {
  double scale = 1.0;
  double offset = 0.0;

  double to_original(double stored) const { return scale * stored + offset; }
  bool is_identity() const { return scale == 1.0 && offset == 0.0; }
};

/// Immutable columnar dataset. Construction validates every invariant, so a
/// Dataset instance is always well formed.
class Dataset {
 public:
  static Dataset create(std::vector<double> outcome,
                        std::vector<int> exposure,
                        std::vector<std::vector<double>> columns,
                        std::vector<std::string> column_names,
                        OutcomeKind kind = OutcomeKind::continuous,
                        AffineMap outcome_map = {});

  std::size_t n() const { return outcome_.size(); }
  std::size_t p() const { return columns_.size(); }

  std::span<const double> outcome() const { return outcome_; }
  /// Exposure stored as 0.0 / 1.0.
  std::span<const double> exposure() const { return exposure_; }
  std::span<const double> column(std::size_t j) const { return columns_[j]; }
  const std::vector<std::string>& column_names() const { return names_; }
  const std::string& column_name(std::size_t j) const { return names_[j]; }
  std::optional<std::size_t> column_index(std::string_view name) const;

  OutcomeKind outcome_kind() const { return kind_; }
  const AffineMap& outcome_map() const { return map_; }

  double exposure_rate() const { return exposure_rate_; }
  double outcome_mean() const { return outcome_mean_; }

  /// Copy with rows reordered: row i of the result is row order[i] here.
  Dataset permuted(std::span<const std::size_t> order) const;
  /// Copy with the outcome multiplied by a positive constant.
  Dataset with_scaled_outcome(double factor) const;

 private:
  Dataset() = default;

  std::vector<double> outcome_;
  std::vector<double> exposure_;
  std::vector<std::vector<double>> columns_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  OutcomeKind kind_ = OutcomeKind::continuous;
  AffineMap map_;
  double exposure_rate_ = 0.0;
  double outcome_mean_ = 0.0;
};

struct CsvOptions {
  std::string outcome_column;
  std::string exposure_column;
  OutcomeKind outcome_kind = OutcomeKind::continuous;
};

/// RFC-4180 reader: comma separator, header row, quoted fields with doubled
/// quotes, LF or CRLF line endings.
std::vector<std::vector<std::string>> parse_delimited(std::string_view text);

Dataset parse_csv(std::string_view text, const CsvOptions& options);
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);

/// Writes outcome, exposure and covariates (stored values, shortest
/// round-trip formatting).
void write_csv(const Dataset& data, std::ostream& out,
               std::string_view outcome_column = "outcome",
               std::string_view exposure_column = "exposure");

/// Affine map sending [min, max] of the values onto [0, 1]; identity when
/// the values already lie in [0, 1].
AffineMap unit_interval_map(std::span<const double> values);

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;  // divisor n - 1
  bool constant = false;
};

Standardized standardize(std::span<const double> column);

/// A named covariate or covariate group scored as one unit.
struct Target {
  std::size_t index = 0;  // position in the report, 0-based
  std::string name;
  std::vector<std::size_t> columns;
};

struct GroupSpec {
  std::vector<Target> groups;
};

/// Validates and resolves (group name, member column names) pairs.
GroupSpec make_groups(
    const Dataset& data,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& spec);
/// Parses a JSON object {"group": ["col", ...], ...}; file order is kept.
GroupSpec parse_groups(std::string_view json_text, const Dataset& data);
GroupSpec load_groups(const std::filesystem::path& path, const Dataset& data);

/// One single-column target per covariate, in column order.
std::vector<Target> covariate_targets(const Dataset& data);

std::string read_file(const std::filesystem::path& path);

}  // namespace confscore
