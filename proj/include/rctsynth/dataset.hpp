#pragma once

// Typed tabular data: column schema, an immutable column-major table with a
// missingness mask, CSV ingestion/emission and the row/column transforms the
// generators and metrics need.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rctsynth/error.hpp"
#include "rctsynth/random.hpp"

namespace rctsynth {

enum class ColumnKind { continuous, discrete };

enum class TemporalStage { baseline, treatment, post_randomization, outcome };

inline std::string to_string(ColumnKind k) { return k == ColumnKind::continuous ? "continuous" : "discrete"; }

inline std::string to_string(TemporalStage s) {
  switch (s) {
    case TemporalStage::baseline: return "baseline";
    case TemporalStage::treatment: return "treatment";
    case TemporalStage::post_randomization: return "post_randomization";
    case TemporalStage::outcome: return "outcome";
  }
  return "?";
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> categories;  // discrete only, ordered
  std::optional<double> lower_bound;    // admissibility floor
  bool log_transform = false;
  TemporalStage stage = TemporalStage::baseline;
  int order = 0;  // position among post-randomization variables

  bool is_discrete() const { return kind == ColumnKind::discrete; }

  std::optional<std::size_t> category_index(std::string_view label) const {
    for (std::size_t k = 0; k < categories.size(); ++k) {
      if (categories[k] == label) return k;
    }
    return std::nullopt;
  }

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

using Schema = std::vector<ColumnSchema>;

// Schema invariants that hold for a single column.
inline void validate_column_schema(const ColumnSchema& c) {
  if (c.name.empty()) throw SchemaError("column with empty name");
  if (c.is_discrete()) {
    if (c.categories.size() < 2) throw SchemaError("discrete column '" + c.name + "' needs at least 2 categories");
    for (std::size_t i = 0; i < c.categories.size(); ++i) {
      for (std::size_t j = i + 1; j < c.categories.size(); ++j) {
        if (c.categories[i] == c.categories[j]) {
          throw SchemaError("discrete column '" + c.name + "' repeats category '" + c.categories[i] + "'");
        }
      }
    }
  } else if (!c.categories.empty()) {
    throw SchemaError("continuous column '" + c.name + "' must not list categories");
  }
}

// Whole-schema invariants: unique names, one treatment, one outcome.
inline void validate_schema(const Schema& schema) {
  std::size_t n_treatment = 0, n_outcome = 0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    validate_column_schema(schema[i]);
    for (std::size_t j = 0; j < i; ++j) {
      if (schema[i].name == schema[j].name) throw SchemaError("duplicate column name '" + schema[i].name + "'");
    }
    if (schema[i].stage == TemporalStage::treatment) ++n_treatment;
    if (schema[i].stage == TemporalStage::outcome) ++n_outcome;
  }
  if (n_treatment != 1) throw SchemaError("schema must have exactly one treatment column, found " + std::to_string(n_treatment));
  if (n_outcome != 1) throw SchemaError("schema must have exactly one outcome column, found " + std::to_string(n_outcome));
}

// One column of cells. Discrete cells hold the category index as a double.
struct Column {
  std::vector<double> values;
  std::vector<std::uint8_t> missing;

  Column() = default;
  explicit Column(std::vector<double> v) : values(std::move(v)), missing(values.size(), 0) {}
  Column(std::vector<double> v, std::vector<std::uint8_t> m) : values(std::move(v)), missing(std::move(m)) {}

  std::size_t size() const { return values.size(); }
  bool is_missing(std::size_t r) const { return missing[r] != 0; }

  std::vector<double> observed() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (!missing[r]) out.push_back(values[r]);
    }
    return out;
  }

  std::size_t missing_count() const {
    return static_cast<std::size_t>(std::count_if(missing.begin(), missing.end(), [](auto m) { return m != 0; }));
  }
};

class DataTable {
 public:
  DataTable() = default;

  // Validates per-cell invariants; throws SchemaError on violation.
  DataTable(Schema schema, std::vector<Column> columns) : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (schema_.size() != columns_.size()) {
      throw SchemaError("schema has " + std::to_string(schema_.size()) + " columns but " +
                        std::to_string(columns_.size()) + " were supplied");
    }
    n_rows_ = columns_.empty() ? 0 : columns_.front().size();
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      validate_column_schema(schema_[c]);
      const Column& col = columns_[c];
      if (col.values.size() != n_rows_ || col.missing.size() != n_rows_) {
        throw SchemaError("column '" + schema_[c].name + "' has inconsistent row count");
      }
      for (std::size_t r = 0; r < n_rows_; ++r) {
        if (col.missing[r]) continue;
        const double v = col.values[r];
        if (!std::isfinite(v)) {
          throw SchemaError("non-finite value in column '" + schema_[c].name + "' row " + std::to_string(r));
        }
        if (schema_[c].is_discrete()) {
          if (v < 0 || v >= static_cast<double>(schema_[c].categories.size()) || v != std::floor(v)) {
            throw SchemaError("invalid category code in column '" + schema_[c].name + "' row " + std::to_string(r));
          }
        }
      }
    }
  }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return columns_.size(); }
  const Schema& schema() const { return schema_; }
  const ColumnSchema& column_schema(std::size_t c) const { return schema_.at(c); }
  const Column& column(std::size_t c) const { return columns_.at(c); }
  const Column& column(std::string_view name) const { return columns_[column_index(name)]; }
  const std::vector<Column>& columns() const { return columns_; }

  double at(std::size_t r, std::size_t c) const { return columns_[c].values[r]; }
  bool missing(std::size_t r, std::size_t c) const { return columns_[c].missing[r] != 0; }

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      if (schema_[c].name == name) return c;
    }
    return std::nullopt;
  }

  std::size_t column_index(std::string_view name) const {
    auto c = find_column(name);
    if (!c) throw ArgumentError("unknown column '" + std::string(name) + "'");
    return *c;
  }

  DataTable select_rows(const std::vector<std::size_t>& rows) const {
    std::vector<Column> cols(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      cols[c].values.reserve(rows.size());
      cols[c].missing.reserve(rows.size());
      for (std::size_t r : rows) {
        cols[c].values.push_back(columns_[c].values.at(r));
        cols[c].missing.push_back(columns_[c].missing.at(r));
      }
    }
    return DataTable(schema_, std::move(cols));
  }

  DataTable select_columns(const std::vector<std::string>& names) const {
    Schema s;
    std::vector<Column> cols;
    for (const auto& n : names) {
      const std::size_t c = column_index(n);
      s.push_back(schema_[c]);
      cols.push_back(columns_[c]);
    }
    return DataTable(std::move(s), std::move(cols));
  }

  DataTable with_column(std::size_t c, Column column) const {
    std::vector<Column> cols = columns_;
    cols.at(c) = std::move(column);
    return DataTable(schema_, std::move(cols));
  }

  friend bool operator==(const DataTable& a, const DataTable& b) {
    if (a.schema_ != b.schema_ || a.n_rows_ != b.n_rows_) return false;
    for (std::size_t c = 0; c < a.columns_.size(); ++c) {
      if (a.columns_[c].missing != b.columns_[c].missing) return false;
      for (std::size_t r = 0; r < a.n_rows_; ++r) {
        if (!a.columns_[c].missing[r] && a.columns_[c].values[r] != b.columns_[c].values[r]) return false;
      }
    }
    return true;
  }

 private:
  Schema schema_;
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline bool is_missing_token(std::string_view s) { return s.empty() || s == "NA"; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Double-quoted fields may contain commas and "".
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

}  // namespace detail

inline DataTable read_csv(std::istream& in, const Schema& schema, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file, expected a header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  auto header = detail::split_csv_line(line);
  if (header.size() != schema.size()) {
    throw SchemaError(source + ": header has " + std::to_string(header.size()) + " fields, schema has " +
                      std::to_string(schema.size()));
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (detail::trim(header[c]) != schema[c].name) {
      throw SchemaError(source + ": header field " + std::to_string(c + 1) + " is '" + header[c] + "', expected '" +
                        schema[c].name + "'");
    }
  }
  std::vector<Column> cols(schema.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != schema.size()) {
      throw ParseError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(schema.size()));
    }
    const std::size_t row = cols.front().values.size();
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const std::string_view cell = detail::trim(fields[c]);
      if (detail::is_missing_token(cell)) {
        cols[c].values.push_back(0.0);
        cols[c].missing.push_back(1);
        continue;
      }
      double v = 0.0;
      if (schema[c].is_discrete()) {
        auto k = schema[c].category_index(cell);
        if (!k) {
          throw SchemaError(source + ": row " + std::to_string(row + 1) + ", column '" + schema[c].name +
                            "': unknown category '" + std::string(cell) + "'");
        }
        v = static_cast<double>(*k);
      } else {
        auto parsed = detail::parse_double(cell);
        if (!parsed) {
          throw ParseError(source + ": row " + std::to_string(row + 1) + ", column '" + schema[c].name +
                           "': cannot parse '" + std::string(cell) + "' as a number");
        }
        v = *parsed;
      }
      cols[c].values.push_back(v);
      cols[c].missing.push_back(0);
    }
  }
  return DataTable(schema, std::move(cols));
}

// Observed values below a column's declared floor.
inline std::size_t count_bound_violations(const DataTable& table, std::size_t c) {
  const auto& cs = table.column_schema(c);
  if (!cs.lower_bound) return 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    if (!table.missing(r, c) && table.at(r, c) < *cs.lower_bound) ++n;
  }
  return n;
}

inline void check_lower_bounds(const DataTable& table, const std::string& source) {
  for (std::size_t c = 0; c < table.n_cols(); ++c) {
    const auto& cs = table.column_schema(c);
    if (!cs.lower_bound) continue;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
      if (!table.missing(r, c) && table.at(r, c) < *cs.lower_bound) {
        throw SchemaError(source + ": row " + std::to_string(r + 1) + ", column '" + cs.name + "': value " +
                          detail::format_double(table.at(r, c)) + " is below the lower bound " +
                          detail::format_double(*cs.lower_bound));
      }
    }
  }
}

// Real data must respect declared floors; synthetic files produced by the
// unbounded randomness strategies are read with enforce_bounds = false.
inline DataTable load_csv(const std::string& path, const Schema& schema, bool enforce_bounds = true) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  DataTable t = read_csv(in, schema, path);
  if (enforce_bounds) check_lower_bounds(t, path);
  return t;
}

inline void write_csv(std::ostream& out, const DataTable& table) {
  const auto& schema = table.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out << ',';
    out << detail::quote_if_needed(schema[c].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out << ',';
      if (table.missing(r, c)) {
        out << "NA";
      } else if (schema[c].is_discrete()) {
        out << detail::quote_if_needed(schema[c].categories[static_cast<std::size_t>(table.at(r, c))]);
      } else {
        out << detail::format_double(table.at(r, c));
      }
    }
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const DataTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out, table);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Row and value transforms

inline std::pair<DataTable, DataTable> train_test_split(const DataTable& table, double test_fraction, Seed seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("test fraction must lie in (0,1), got " + std::to_string(test_fraction));
  }
  const std::size_t n = table.n_rows();
  if (n < 2) throw ArgumentError("train/test split needs at least 2 rows");
  auto n_train = static_cast<std::size_t>(std::llround((1.0 - test_fraction) * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  shuffle(perm, rng);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {table.select_rows(train), table.select_rows(test)};
}

// Rows with no missing cell among `columns`, in original order.
inline std::vector<std::size_t> complete_case_rows(const DataTable& table, const std::vector<std::string>& columns) {
  std::vector<std::size_t> idx;
  idx.reserve(columns.size());
  for (const auto& name : columns) idx.push_back(table.column_index(name));
  std::vector<std::size_t> rows;
  rows.reserve(table.n_rows());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    bool ok = true;
    for (std::size_t c : idx) {
      if (table.missing(r, c)) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(r);
  }
  return rows;
}

inline DataTable complete_cases(const DataTable& table, const std::vector<std::string>& columns) {
  auto rows = complete_case_rows(table, columns);
  if (rows.size() == table.n_rows()) return table;
  return table.select_rows(rows);
}

// Left-continuous empirical quantile of an ascending sample:
// the smallest order statistic x_(k) with k/n >= q.
inline double empirical_quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-12));
  k = std::clamp<std::size_t>(k, 1, n);
  return sorted[k - 1];
}

// Quartile cut points (q = 1/4, 2/4, 3/4) of the non-missing values.
inline std::array<double, 3> quartile_boundaries(std::vector<double> values) {
  if (values.size() < 4) {
    throw DegenerateInputError("quartile binning needs at least 4 non-missing values, got " +
                               std::to_string(values.size()));
  }
  std::sort(values.begin(), values.end());
  return {empirical_quantile_sorted(values, 0.25), empirical_quantile_sorted(values, 0.5),
          empirical_quantile_sorted(values, 0.75)};
}

// Bin index 1..4 for value x: one plus the number of cut points strictly below x.
inline int quartile_bin_of(double x, const std::array<double, 3>& cuts) {
  int bin = 1;
  for (double q : cuts) {
    if (x > q) ++bin;
  }
  return bin;
}

// Missing input cells map to std::nullopt.
inline std::vector<std::optional<int>> quartile_bin(const std::vector<std::optional<double>>& values) {
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  const auto cuts = quartile_boundaries(present);
  std::vector<std::optional<int>> out;
  out.reserve(values.size());
  for (const auto& v : values) {
    out.push_back(v ? std::optional<int>(quartile_bin_of(*v, cuts)) : std::nullopt);
  }
  return out;
}

enum class TransformDirection { forward, inverse };

// Natural log (forward) or exp (inverse) of every log-flagged continuous column.
inline DataTable apply_transform(const DataTable& table, TransformDirection direction) {
  std::vector<Column> cols = table.columns();
  for (std::size_t c = 0; c < table.n_cols(); ++c) {
    const auto& cs = table.column_schema(c);
    if (!cs.log_transform || cs.is_discrete()) continue;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
      if (cols[c].missing[r]) continue;
      double& v = cols[c].values[r];
      if (direction == TransformDirection::forward) {
        if (!(v > 0.0)) {
          throw DomainError("log transform of non-positive value " + detail::format_double(v) + " at row " +
                            std::to_string(r) + ", column '" + cs.name + "'");
        }
        v = std::log(v);
      } else {
        v = std::exp(v);
      }
    }
  }
  return DataTable(table.schema(), std::move(cols));
}

}  // namespace rctsynth
