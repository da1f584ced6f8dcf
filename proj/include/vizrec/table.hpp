// Copyright 2026 The vizrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tabular ingestion: delimited-text parsing, semantic type inference and
// per-column statistics.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vizrec/cell.hpp"
#include "vizrec/error.hpp"

namespace vizrec {

enum class SemanticType { kCategorical, kNumeric, kTemporal };

inline std::string_view to_string(SemanticType t) {
  switch (t) {
    case SemanticType::kCategorical: return "categorical";
    case SemanticType::kNumeric: return "numeric";
    case SemanticType::kTemporal: return "temporal";
  }
  return "categorical";
}

inline std::optional<SemanticType> semantic_type_from_string(std::string_view s) {
  if (s == "categorical") return SemanticType::kCategorical;
  if (s == "numeric") return SemanticType::kNumeric;
  if (s == "temporal") return SemanticType::kTemporal;
  return std::nullopt;
}

struct ColumnStats {
  std::size_t distinct_count = 0;
  double unique_ratio = 0.0;
  // Present for numeric and temporal columns with at least one value.
  std::optional<Cell> min;
  std::optional<Cell> max;
  std::size_t null_count = 0;
  std::vector<Cell> sample_values;
};

struct Column {
  std::string name;
  SemanticType semantic_type = SemanticType::kCategorical;
  ColumnStats stats;
};

struct IngestOptions {
  char delimiter = ',';
  std::size_t max_rows = 1'000'000;
  // Fraction of non-null cells that must parse for a typed column.
  double type_threshold = 0.9;
  // Defaults to the file stem when loading from disk.
  std::string name;
};

// Immutable after construction.
class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<Column> columns, std::vector<Cell> cells)
      : name_(std::move(name)),
        columns_(std::move(columns)),
        cells_(std::move(cells)) {
    row_count_ = columns_.empty() ? 0 : cells_.size() / columns_.size();
    encode();
  }

  static constexpr std::uint32_t kNullCode = 0xffffffffu;

  const std::string& name() const { return name_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::size_t column_count() const { return columns_.size(); }
  std::size_t row_count() const { return row_count_; }

  const Column& column(std::size_t index) const { return columns_.at(index); }
  const Cell& cell(std::size_t row, std::size_t col) const {
    return cells_[row * columns_.size() + col];
  }

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].name == name) return i;
    }
    return std::nullopt;
  }

  SemanticType type_of(std::size_t col) const {
    return columns_[col].semantic_type;
  }

  // Dictionary encoding: per-row codes into distinct_values(col), in order of
  // first occurrence. Nulls get kNullCode.
  const std::vector<std::uint32_t>& codes(std::size_t col) const { return dict_[col].codes; }
  const std::vector<Cell>& distinct_values(std::size_t col) const { return dict_[col].values; }

 private:
  struct Dictionary {
    std::vector<std::uint32_t> codes;
    std::vector<Cell> values;
  };

  // Builds the dictionaries and, from them, each column's stats.
  void encode() {
    dict_.resize(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      Dictionary& d = dict_[c];
      ColumnStats& stats = columns_[c].stats;
      stats = ColumnStats{};
      d.codes.resize(row_count_);
      std::unordered_map<Cell, std::uint32_t, CellHash> seen;
      seen.reserve(std::min<std::size_t>(row_count_, 4096));
      for (std::size_t r = 0; r < row_count_; ++r) {
        const Cell& v = cell(r, c);
        if (is_null(v)) {
          d.codes[r] = kNullCode;
          ++stats.null_count;
          continue;
        }
        auto [it, inserted] = seen.try_emplace(v, static_cast<std::uint32_t>(d.values.size()));
        if (inserted) d.values.push_back(v);
        d.codes[r] = it->second;
      }
      for (const Cell& v : d.values) {
        if (stats.sample_values.size() < 5) stats.sample_values.push_back(v);
        if (std::holds_alternative<double>(v) || std::holds_alternative<Timestamp>(v)) {
          if (!stats.min || v < *stats.min) stats.min = v;
          if (!stats.max || *stats.max < v) stats.max = v;
        }
      }
      stats.distinct_count = d.values.size();
      const std::size_t non_null = row_count_ - stats.null_count;
      stats.unique_ratio = static_cast<double>(stats.distinct_count) /
                           static_cast<double>(std::max<std::size_t>(1, non_null));
    }
  }

  std::string name_;
  std::vector<Column> columns_;
  std::vector<Cell> cells_;  // row-major
  std::size_t row_count_ = 0;
  std::vector<Dictionary> dict_;
};

namespace detail {

// RFC 4180 record splitter. Quoted fields may contain the delimiter, doubled
// quotes and newlines.
inline std::vector<std::vector<std::string>> split_records(std::string_view text,
                                                           char delimiter) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB &&
      static_cast<unsigned char>(text[2]) == 0xBF) {
    i = 3;
  }
  auto end_record = [&] {
    // An unquoted empty line is blank; a lone "" is an empty field.
    bool blank = record.empty() && field.empty() && !field_started;
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };
  for (; i < text.size(); ++i) {
    char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == delimiter) {
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (ch == '\n') {
      end_record();
    } else if (ch == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_record();
    } else {
      // Plain run up to the next delimiter or line break; quotes inside an
      // unquoted field are literal.
      std::size_t j = i + 1;
      while (j < text.size() && text[j] != delimiter && text[j] != '\n' && text[j] != '\r') ++j;
      field.append(text.data() + i, j - i);
      field_started = true;
      i = j - 1;
    }
  }
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace detail

// Temporal if at least `threshold` of the non-null cells parse as dates,
// else numeric under the same test, else categorical. All-null input is
// categorical.
inline SemanticType infer_semantic_type(const std::vector<std::string_view>& cells,
                                        double threshold = 0.9) {
  std::size_t non_null = 0, temporal = 0, numeric = 0;
  for (std::string_view raw : cells) {
    if (is_null_token(raw)) continue;
    ++non_null;
    if (parse_timestamp(raw)) ++temporal;
    if (parse_number(raw)) ++numeric;
  }
  if (non_null == 0) return SemanticType::kCategorical;
  double n = static_cast<double>(non_null);
  if (static_cast<double>(temporal) >= threshold * n) return SemanticType::kTemporal;
  if (static_cast<double>(numeric) >= threshold * n) return SemanticType::kNumeric;
  return SemanticType::kCategorical;
}

inline SemanticType infer_semantic_type(const std::vector<std::string>& cells,
                                        double threshold = 0.9) {
  std::vector<std::string_view> views(cells.begin(), cells.end());
  return infer_semantic_type(views, threshold);
}

inline Table parse_table(std::string_view text, const IngestOptions& options = {}) {
  if (detail::trim(text).empty()) {
    throw IngestError(IngestError::Kind::Empty, "input contains no data");
  }
  auto records = detail::split_records(text, options.delimiter);
  if (records.empty()) {
    throw IngestError(IngestError::Kind::Empty, "input contains no data");
  }
  const std::vector<std::string>& header = records.front();
  std::unordered_set<std::string> seen;
  std::vector<Column> columns;
  for (const std::string& raw : header) {
    std::string name(detail::trim(raw));
    if (!seen.insert(name).second) {
      throw IngestError(IngestError::Kind::DuplicateColumn,
                        "duplicate column name '" + name + "'");
    }
    columns.push_back(Column{name, SemanticType::kCategorical, {}});
  }
  std::size_t rows = records.size() - 1;
  if (rows == 0) {
    throw IngestError(IngestError::Kind::NoRows, "header row without data rows");
  }
  if (rows > options.max_rows) {
    throw IngestError(IngestError::Kind::TooManyRows,
                      std::to_string(rows) + " rows exceed the limit of " +
                          std::to_string(options.max_rows));
  }
  const std::size_t m = columns.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != m) {
      throw IngestError(IngestError::Kind::RaggedRow,
                        "record " + std::to_string(r) + " has " +
                            std::to_string(records[r].size()) +
                            " fields, header has " + std::to_string(m));
    }
  }

  std::vector<Cell> cells(rows * m);
  std::vector<std::string_view> column_raw(rows);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column_raw[r] = records[r + 1][c];
    SemanticType type = infer_semantic_type(column_raw, options.type_threshold);
    columns[c].semantic_type = type;
    for (std::size_t r = 0; r < rows; ++r) {
      std::string_view raw = column_raw[r];
      Cell& out = cells[r * m + c];
      if (is_null_token(raw)) continue;
      switch (type) {
        case SemanticType::kTemporal:
          if (auto t = parse_timestamp(raw)) out = *t;
          break;
        case SemanticType::kNumeric:
          if (auto v = parse_number(raw)) out = *v;
          break;
        case SemanticType::kCategorical:
          out = std::string(detail::trim(raw));
          break;
      }
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
  }
  return Table(options.name.empty() ? "table" : options.name, std::move(columns),
               std::move(cells));
}

inline Table load_table(const std::filesystem::path& path,
                        const IngestOptions& options = {}) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IngestError(IngestError::Kind::FileNotFound,
                      "file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IngestError(IngestError::Kind::FileNotFound,
                      "file not found: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  IngestOptions opts = options;
  if (opts.name.empty()) opts.name = path.stem().string();
  return parse_table(buffer.str(), opts);
}

// Serializes a table back to delimited text. Re-ingesting the output yields
// the same column types and cells.
inline std::string write_delimited(const Table& table, char delimiter = ',') {
  auto quote = [delimiter](std::string_view s) {
    bool needs = s.empty() || s.front() == ' ' || s.back() == ' ' ||
                 s.find_first_of(std::string{delimiter, '"', '\n', '\r'}) !=
                     std::string_view::npos;
    if (!needs) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"') out.push_back('"');
      out.push_back(ch);
    }
    out.push_back('"');
    return out;
  };
  std::string out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    if (c) out.push_back(delimiter);
    out += quote(table.column(c).name);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    // A lone null would print as a blank line, which readers skip.
    if (table.column_count() == 1 && is_null(table.cell(r, 0))) {
      out += "\"\"\n";
      continue;
    }
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c) out.push_back(delimiter);
      const Cell& cell = table.cell(r, c);
      if (is_null(cell)) continue;
      if (std::holds_alternative<std::string>(cell)) {
        out += quote(std::get<std::string>(cell));
      } else {
        out += cell_to_string(cell);
      }
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace vizrec
