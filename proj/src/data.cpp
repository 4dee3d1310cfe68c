#include "confscore/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "confscore/error.hpp"

namespace confscore {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

void write_field(std::ostream& out, std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_number(std::ostream& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

}  // namespace

std::string_view outcome_kind_name(OutcomeKind kind) {
  return kind == OutcomeKind::bounded ? "bounded" : "continuous";
}

OutcomeKind parse_outcome_kind(std::string_view text) {
  if (text == "continuous") return OutcomeKind::continuous;
  if (text == "bounded") return OutcomeKind::bounded;
  throw Error(ErrorKind::config,
              "unknown outcome kind '" + std::string(text) + "'");
}

Dataset Dataset::create(std::vector<double> outcome, std::vector<int> exposure,
                        std::vector<std::vector<double>> columns,
                        std::vector<std::string> column_names,
                        OutcomeKind kind, AffineMap outcome_map) {
  const std::size_t n = outcome.size();
  if (n < 2) throw Error(ErrorKind::validation, "need at least 2 rows");
  if (exposure.size() != n)
    throw Error(ErrorKind::validation, "exposure length differs from outcome");
  if (columns.empty())
    throw Error(ErrorKind::validation, "need at least one covariate");
  if (column_names.size() != columns.size())
    throw Error(ErrorKind::validation, "column name count differs from covariate count");
  if (!(outcome_map.scale > 0.0) || !std::isfinite(outcome_map.offset))
    throw Error(ErrorKind::validation, "outcome map scale must be positive");

  Dataset d;
  d.exposure_.resize(n);
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (exposure[i] != 0 && exposure[i] != 1)
      throw Error(ErrorKind::validation,
                  "exposure must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    d.exposure_[i] = exposure[i];
    treated += static_cast<std::size_t>(exposure[i]);
  }
  if (treated == 0 || treated == n)
    throw Error(ErrorKind::validation,
                "exposure is constant: mu_E in {0,1}, both arms are required");

  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(outcome[i]))
      throw Error(ErrorKind::validation,
                  "non-finite outcome at row " + std::to_string(i + 1));
    if (kind == OutcomeKind::bounded && (outcome[i] < 0.0 || outcome[i] > 1.0))
      throw Error(ErrorKind::validation,
                  "bounded outcome outside [0,1] at row " + std::to_string(i + 1));
  }
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].size() != n)
      throw Error(ErrorKind::validation,
                  "covariate '" + column_names[j] + "' has wrong length");
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(columns[j][i]))
        throw Error(ErrorKind::validation,
                    "non-finite value in covariate '" + column_names[j] +
                        "' at row " + std::to_string(i + 1));
    if (!d.index_.emplace(column_names[j], j).second)
      throw Error(ErrorKind::validation,
                  "duplicate column name '" + column_names[j] + "'");
  }

  d.outcome_mean_ =
      std::accumulate(outcome.begin(), outcome.end(), 0.0) / static_cast<double>(n);
  d.exposure_rate_ = static_cast<double>(treated) / static_cast<double>(n);
  d.outcome_ = std::move(outcome);
  d.columns_ = std::move(columns);
  d.names_ = std::move(column_names);
  d.kind_ = kind;
  d.map_ = outcome_map;
  return d;
}

std::optional<std::size_t> Dataset::column_index(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Dataset Dataset::permuted(std::span<const std::size_t> order) const {
  std::vector<double> o(n());
  std::vector<int> e(n());
  std::vector<std::vector<double>> cols(p(), std::vector<double>(n()));
  for (std::size_t i = 0; i < n(); ++i) {
    o[i] = outcome_[order[i]];
    e[i] = static_cast<int>(exposure_[order[i]]);
    for (std::size_t j = 0; j < p(); ++j) cols[j][i] = columns_[j][order[i]];
  }
  return create(std::move(o), std::move(e), std::move(cols), names_, kind_, map_);
}

Dataset Dataset::with_scaled_outcome(double factor) const {
  if (!(factor > 0.0))
    throw Error(ErrorKind::precondition, "outcome scale factor must be positive");
  std::vector<double> o(outcome_);
  for (double& v : o) v *= factor;
  std::vector<int> e(exposure_.begin(), exposure_.end());
  return create(std::move(o), std::move(e), columns_, names_,
                OutcomeKind::continuous, {});
}

std::vector<std::vector<std::string>> parse_delimited(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;

  const auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
    const bool blank = row.size() == 1 && row[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() && !is_blank(field))
          throw Error(ErrorKind::parse,
                      "unexpected quote inside unquoted field at line " +
                          std::to_string(line));
        if (field_was_quoted)
          throw Error(ErrorKind::parse,
                      "malformed quoted field at line " + std::to_string(line));
        field.clear();
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        field.push_back(c);
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        if (field_was_quoted && c != ' ' && c != '\t')
          throw Error(ErrorKind::parse,
                      "text after closing quote at line " + std::to_string(line));
        if (!field_was_quoted) field.push_back(c);
    }
  }
  if (in_quotes)
    throw Error(ErrorKind::parse, "unterminated quoted field");
  if (!field.empty() || !row.empty() || field_was_quoted) end_row();
  return rows;
}

Dataset parse_csv(std::string_view text, const CsvOptions& options) {
  const auto rows = parse_delimited(text);
  if (rows.empty()) throw Error(ErrorKind::parse, "empty file: no header row");
  const auto& header = rows.front();

  const auto find = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorKind::missing_column,
                  "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t oc = find(options.outcome_column);
  const std::size_t ec = find(options.exposure_column);
  if (oc == ec)
    throw Error(ErrorKind::validation, "outcome and exposure name the same column");

  std::vector<std::size_t> cov_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == oc || c == ec) continue;
    cov_cols.push_back(c);
    names.push_back(header[c]);
  }

  const std::size_t n = rows.size() - 1;
  std::vector<double> outcome(n);
  std::vector<int> exposure(n);
  std::vector<std::vector<double>> columns(cov_cols.size(), std::vector<double>(n));

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw Error(ErrorKind::parse,
                  "row " + std::to_string(r + 1) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(row.size()));
    const auto cell = [&](std::size_t c) {
      const auto v = parse_number(row[c]);
      if (!v)
        throw Error(ErrorKind::parse,
                    "row " + std::to_string(r + 1) + " column '" + header[c] +
                        "': cannot parse '" + row[c] + "' as a finite number");
      return *v;
    };
    const std::size_t i = r - 1;
    outcome[i] = cell(oc);
    const double e = cell(ec);
    if (e != 0.0 && e != 1.0)
      throw Error(ErrorKind::validation,
                  "row " + std::to_string(r + 1) + " column '" + header[ec] +
                      "': exposure must be 0 or 1");
    exposure[i] = static_cast<int>(e);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) columns[k][i] = cell(cov_cols[k]);
  }

  AffineMap map;
  if (options.outcome_kind == OutcomeKind::bounded) {
    map = unit_interval_map(outcome);
    for (double& v : outcome) v = (v - map.offset) / map.scale;
    // guard the endpoints against rounding just outside [0, 1]
    for (double& v : outcome) v = std::clamp(v, 0.0, 1.0);
  }
  return Dataset::create(std::move(outcome), std::move(exposure),
                         std::move(columns), std::move(names),
                         options.outcome_kind, map);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  return parse_csv(read_file(path), options);
}

void write_csv(const Dataset& data, std::ostream& out,
               std::string_view outcome_column, std::string_view exposure_column) {
  write_field(out, outcome_column);
  out << ',';
  write_field(out, exposure_column);
  for (const auto& name : data.column_names()) {
    out << ',';
    write_field(out, name);
  }
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    write_number(out, data.outcome()[i]);
    out << ',' << (data.exposure()[i] != 0.0 ? '1' : '0');
    for (std::size_t j = 0; j < data.p(); ++j) {
      out << ',';
      write_number(out, data.column(j)[i]);
    }
    out << '\n';
  }
}

AffineMap unit_interval_map(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo >= 0.0 && *hi <= 1.0) return {};
  if (*hi > *lo) return {*hi - *lo, *lo};
  return {1.0, *lo};
}

Standardized standardize(std::span<const double> column) {
  Standardized out;
  out.values.assign(column.begin(), column.end());
  const std::size_t n = column.size();
  if (n == 0) {
    out.constant = true;
    return out;
  }
  out.mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : column) ss += (v - out.mean) * (v - out.mean);
  out.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  const bool all_equal = std::all_of(column.begin(), column.end(),
                                     [&](double v) { return v == column[0]; });
  if (all_equal || out.sd == 0.0) {
    out.sd = 0.0;
    out.constant = true;
    return out;
  }
  for (double& v : out.values) v = (v - out.mean) / out.sd;
  return out;
}

GroupSpec make_groups(
    const Dataset& data,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& spec) {
  GroupSpec out;
  std::set<std::string> names;
  std::unordered_map<std::size_t, std::string> owner;
  for (const auto& [name, members] : spec) {
    if (!names.insert(name).second)
      throw Error(ErrorKind::duplicate_group, "duplicate group name '" + name + "'");
    if (members.empty())
      throw Error(ErrorKind::empty_group, "group '" + name + "' has no members");
    Target t;
    t.index = out.groups.size();
    t.name = name;
    for (const auto& col : members) {
      const auto j = data.column_index(col);
      if (!j)
        throw Error(ErrorKind::unknown_column,
                    "group '" + name + "' names unknown column '" + col + "'");
      const auto [it, fresh] = owner.emplace(*j, name);
      if (!fresh)
        throw Error(ErrorKind::duplicate_membership,
                    "column '" + col + "' appears in group '" + it->second +
                        "' and group '" + name + "'");
      t.columns.push_back(*j);
    }
    out.groups.push_back(std::move(t));
  }
  if (out.groups.empty())
    throw Error(ErrorKind::validation, "group specification defines no groups");
  return out;
}

GroupSpec parse_groups(std::string_view json_text, const Dataset& data) {
  using json = nlohmann::ordered_json;
  std::set<std::string> seen;
  json doc;
  try {
    doc = json::parse(
        json_text.begin(), json_text.end(),
        [&](int depth, json::parse_event_t event, json& parsed) {
          if (event == json::parse_event_t::key && depth == 1) {
            const auto key = parsed.get<std::string>();
            if (!seen.insert(key).second)
              throw Error(ErrorKind::duplicate_group,
                          "duplicate group name '" + key + "'");
          }
          return true;
        });
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("group file: ") + e.what());
  }
  if (!doc.is_object())
    throw Error(ErrorKind::parse, "group file must be a JSON object {name: [columns]}");

  std::vector<std::pair<std::string, std::vector<std::string>>> spec;
  for (const auto& [name, members] : doc.items()) {
    if (!members.is_array())
      throw Error(ErrorKind::parse, "group '" + name + "' must map to an array");
    std::vector<std::string> cols;
    for (const auto& m : members) {
      if (!m.is_string())
        throw Error(ErrorKind::parse, "group '" + name + "' has a non-string member");
      cols.push_back(m.get<std::string>());
    }
    spec.emplace_back(name, std::move(cols));
  }
  return make_groups(data, spec);
}

GroupSpec load_groups(const std::filesystem::path& path, const Dataset& data) {
  return parse_groups(read_file(path), data);
}

std::vector<Target> covariate_targets(const Dataset& data) {
  std::vector<Target> out(data.p());
  for (std::size_t j = 0; j < data.p(); ++j) {
    out[j].index = j;
    out[j].name = data.column_name(j);
    out[j].columns = {j};
  }
  return out;
}

}  // namespace confscore
