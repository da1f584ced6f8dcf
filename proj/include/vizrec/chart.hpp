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

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vizrec/cell.hpp"
#include "vizrec/error.hpp"
#include "vizrec/query.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

struct ChartPoint {
  Cell x;
  double y = 0.0;
  std::string series;  // empty when the chart has no color channel

  friend bool operator==(const ChartPoint&, const ChartPoint&) = default;
};

struct ChartData {
  Mark mark = Mark::kBar;
  std::string x_label;
  std::string y_label;
  std::string x_field;
  std::string y_field;
  Aggregate aggregate = Aggregate::kNone;
  std::vector<ChartPoint> points;
  // Present when a color or secondary group field splits the data; the
  // legend lists the series names in sorted order.
  std::optional<std::string> color_label;
  std::optional<std::vector<std::string>> legend;

  friend bool operator==(const ChartData&, const ChartData&) = default;
};

// Number of distinct values in `keys`, by open addressing.
inline std::size_t count_distinct(const std::vector<std::uint64_t>& keys) {
  constexpr std::uint64_t kEmpty = ~std::uint64_t{0};
  std::size_t cap = 16;
  while (cap < 2 * keys.size()) cap <<= 1;
  std::vector<std::uint64_t> table(cap, kEmpty);
  std::size_t count = 0;
  bool saw_empty = false;
  for (std::uint64_t k : keys) {
    if (k == kEmpty) {
      saw_empty = true;
      continue;
    }
    std::uint64_t h = k ^ (k >> 33);
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    std::size_t i = h & (cap - 1);
    while (table[i] != kEmpty && table[i] != k) i = (i + 1) & (cap - 1);
    if (table[i] == kEmpty) {
      table[i] = k;
      ++count;
    }
  }
  return count + (saw_empty ? 1 : 0);
}

// Bit pattern of `v` with -0 folded onto +0, so equal doubles get equal keys.
inline std::uint64_t double_key(double v) {
  return std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
}

// Distinct x values among `points`. All x cells of one chart share a type.
inline std::size_t distinct_x_count(const std::vector<ChartPoint>& points) {
  std::vector<std::uint64_t> numbers, instants;
  std::unordered_set<std::string_view> labels;
  bool null = false;
  for (const ChartPoint& p : points) {
    if (const double* d = std::get_if<double>(&p.x)) {
      numbers.push_back(double_key(*d));
    } else if (const Timestamp* t = std::get_if<Timestamp>(&p.x)) {
      instants.push_back(static_cast<std::uint64_t>(t->seconds));
    } else if (const std::string* s = std::get_if<std::string>(&p.x)) {
      labels.insert(*s);
    } else {
      null = true;
    }
  }
  return count_distinct(numbers) + count_distinct(instants) + labels.size() + (null ? 1 : 0);
}

namespace detail {

inline std::size_t require_field(const Table& table, const std::string& name) {
  auto idx = table.find_column(name);
  if (!idx) {
    throw ExecError(ExecError::Kind::UnknownField, "unknown field '" + name + "'");
  }
  return *idx;
}

inline bool compare_cells(const Cell& lhs, CompareOp op, const Cell& rhs) {
  switch (op) {
    case CompareOp::kEq: return lhs == rhs;
    case CompareOp::kNe: return lhs != rhs;
    case CompareOp::kLt: return lhs < rhs;
    case CompareOp::kLe: return lhs <= rhs;
    case CompareOp::kGt: return lhs > rhs;
    case CompareOp::kGe: return lhs >= rhs;
  }
  return false;
}

inline std::string_view weekday_name(unsigned wd) {
  static constexpr std::string_view kNames[] = {"Mon", "Tue", "Wed", "Thu",
                                                "Fri", "Sat", "Sun"};
  return kNames[wd % 7];
}

inline Cell bin_cell(const Cell& c, const Bin& bin) {
  if (is_null(c)) return c;
  switch (bin.granularity) {
    case BinGranularity::kYear: {
      CivilTime t = to_civil(std::get<Timestamp>(c));
      return Timestamp{days_from_civil(t.year, 1, 1) * 86400};
    }
    case BinGranularity::kMonth: {
      CivilTime t = to_civil(std::get<Timestamp>(c));
      return Timestamp{days_from_civil(t.year, t.month, 1) * 86400};
    }
    case BinGranularity::kWeekday:
      return std::string(weekday_name(to_civil(std::get<Timestamp>(c)).weekday));
    case BinGranularity::kBucket: {
      double v = std::get<double>(c);
      return std::floor(v / bin.width) * bin.width;
    }
  }
  return c;
}

// Open-addressing map from a 64-bit key to a slot index, sized up front.
class SlotTable {
 public:
  explicit SlotTable(std::size_t expected) {
    std::size_t cap = 16;
    while (cap < 2 * expected) cap <<= 1;
    keys_.assign(cap, kEmpty);
    slots_.resize(cap);
    mask_ = cap - 1;
  }
  // Returns the slot for `key`, inserting `fresh` if absent.
  std::pair<std::uint32_t, bool> find_or_insert(std::uint64_t key, std::uint32_t fresh) {
    std::size_t i = mix(key) & mask_;
    while (keys_[i] != kEmpty) {
      if (keys_[i] == key) return {slots_[i], false};
      i = (i + 1) & mask_;
    }
    keys_[i] = key;
    slots_[i] = fresh;
    return {fresh, true};
  }

 private:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return x;
  }
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> slots_;
  std::size_t mask_ = 0;
};

struct Accumulator {
  double sum = 0.0;
  std::size_t count = 0;
};

}  // namespace detail

// Runs the query. Pipeline order: filter, bin, group + aggregate, sort, topk.
inline ChartData execute(const VisQuery& query, const Table& table) {
  using detail::require_field;
  const Encoding& enc = query.encoding;
  const Transform& tr = query.transform;

  const std::size_t x_col = require_field(table, enc.x_field);
  const std::size_t y_col = require_field(table, enc.y_field);
  std::optional<std::size_t> color_col;
  if (enc.color_field) color_col = require_field(table, *enc.color_field);
  std::optional<std::size_t> group_col;
  if (tr.group_field) group_col = require_field(table, *tr.group_field);
  std::optional<std::size_t> filter_col;
  if (tr.filter) filter_col = require_field(table, tr.filter->field);
  if (tr.bin) require_field(table, tr.bin->field);

  const SemanticType x_type = table.type_of(x_col);
  const SemanticType y_type = table.type_of(y_col);

  if (color_col) {
    if (table.type_of(*color_col) != SemanticType::kCategorical) {
      throw ExecError(ExecError::Kind::TypeMismatch, "color field must be categorical");
    }
    if (*color_col == x_col) {
      throw ExecError(ExecError::Kind::TypeMismatch, "color field must differ from x");
    }
  }
  if (enc.aggregate != Aggregate::kCount && y_type != SemanticType::kNumeric) {
    throw ExecError(ExecError::Kind::TypeMismatch,
                    std::string(to_string(enc.aggregate)) + " needs a numeric y, '" +
                        enc.y_field + "' is " + std::string(to_string(y_type)));
  }
  if (tr.bin) {
    if (tr.bin->field != enc.x_field) {
      throw ExecError(ExecError::Kind::InvalidTransform, "bin field must be the x field");
    }
    bool temporal_bin = tr.bin->granularity != BinGranularity::kBucket;
    if (temporal_bin && x_type != SemanticType::kTemporal) {
      throw ExecError(ExecError::Kind::TypeMismatch, "calendar bins need a temporal x");
    }
    if (!temporal_bin && (x_type != SemanticType::kNumeric || !(tr.bin->width > 0.0))) {
      throw ExecError(ExecError::Kind::TypeMismatch,
                      "bucket bins need a numeric x and a positive width");
    }
  }
  if (tr.topk && !tr.sort) {
    throw ExecError(ExecError::Kind::InvalidTransform, "topk requires sort");
  }
  if (tr.topk && *tr.topk <= 0) {
    throw ExecError(ExecError::Kind::InvalidTransform, "topk must be positive");
  }
  // The series key is the color field, or the group field when it differs
  // from x.
  std::optional<std::size_t> series_col = color_col;
  if (group_col && *group_col != x_col) {
    if (color_col && *group_col != *color_col) {
      throw ExecError(ExecError::Kind::InvalidTransform,
                      "group field must be the x field or the color field");
    }
    series_col = group_col;
  }
  if (filter_col) {
    const Cell& lit = tr.filter->literal;
    SemanticType ft = table.type_of(*filter_col);
    bool ok = (ft == SemanticType::kNumeric && std::holds_alternative<double>(lit)) ||
              (ft == SemanticType::kTemporal && std::holds_alternative<Timestamp>(lit)) ||
              (ft == SemanticType::kCategorical && std::holds_alternative<std::string>(lit));
    if (!ok) {
      throw ExecError(ExecError::Kind::TypeMismatch, "filter literal type does not match '" +
                                                         tr.filter->field + "'");
    }
  }

  ChartData out;
  out.mark = query.mark;
  out.x_field = enc.x_field;
  out.y_field = enc.y_field;
  out.aggregate = enc.aggregate;
  out.x_label = enc.x_field;
  if (tr.bin) {
    out.x_label += " (" + std::string(detail::to_string(tr.bin->granularity)) + ")";
  }
  out.y_label = enc.aggregate == Aggregate::kNone
                    ? enc.y_field
                    : std::string(to_string(enc.aggregate)) + "(" + enc.y_field + ")";
  if (series_col) out.color_label = table.column(*series_col).name;

  // Work on dictionary codes: the filter, bin and series label are evaluated
  // once per distinct value instead of once per row.
  const std::vector<std::uint32_t>& x_codes = table.codes(x_col);
  const std::vector<std::uint32_t>& y_codes = table.codes(y_col);
  const std::vector<Cell>& x_values = table.distinct_values(x_col);

  std::vector<char> passes;
  if (filter_col) {
    for (const Cell& v : table.distinct_values(*filter_col)) {
      passes.push_back(detail::compare_cells(v, tr.filter->op, tr.filter->literal));
    }
  }
  // With a bin, x codes map onto binned keys; otherwise the codes are the keys.
  std::vector<std::uint32_t> bin_of;
  std::vector<Cell> binned;
  if (tr.bin) {
    bin_of.resize(x_values.size());
    std::unordered_map<Cell, std::uint32_t, CellHash> seen;
    for (std::size_t i = 0; i < x_values.size(); ++i) {
      Cell b = detail::bin_cell(x_values[i], *tr.bin);
      auto [it, inserted] = seen.try_emplace(b, static_cast<std::uint32_t>(binned.size()));
      if (inserted) binned.push_back(std::move(b));
      bin_of[i] = it->second;
    }
  }
  const std::vector<Cell>& x_keys = tr.bin ? binned : x_values;
  auto x_key = [&](std::uint32_t code) { return tr.bin ? bin_of[code] : code; };
  std::vector<std::string> series_names{std::string()};
  if (series_col) {
    series_names.clear();
    for (const Cell& v : table.distinct_values(*series_col)) series_names.push_back(cell_to_string(v));
  }
  std::vector<double> y_numbers;
  if (y_type == SemanticType::kNumeric) {
    for (const Cell& v : table.distinct_values(y_col)) y_numbers.push_back(std::get<double>(v));
  }

  struct Group {
    std::uint32_t x, series;
    detail::Accumulator acc;
  };
  std::vector<Group> groups;
  const std::size_t n_series = series_names.size();
  std::vector<char> series_used(n_series, 0);
  const bool dense = x_keys.size() * n_series <= (std::size_t{1} << 22);
  std::vector<std::int32_t> dense_slot(dense ? x_keys.size() * n_series : 0, -1);
  detail::SlotTable sparse_slot(dense ? 0 : std::min(table.row_count(), x_keys.size() * n_series));
  auto slot_of = [&](std::uint32_t xk, std::uint32_t sk) -> detail::Accumulator& {
    std::size_t at = groups.size();
    if (dense) {
      std::int32_t& s = dense_slot[static_cast<std::size_t>(xk) * n_series + sk];
      if (s >= 0) return groups[static_cast<std::size_t>(s)].acc;
      s = static_cast<std::int32_t>(at);
    } else {
      auto [slot, inserted] = sparse_slot.find_or_insert((std::uint64_t{xk} << 32) | sk,
                                                         static_cast<std::uint32_t>(at));
      if (!inserted) return groups[slot].acc;
    }
    groups.push_back({xk, sk, {}});
    return groups.back().acc;
  };

  const std::vector<std::uint32_t>* f_codes = filter_col ? &table.codes(*filter_col) : nullptr;
  const std::vector<std::uint32_t>* s_codes = series_col ? &table.codes(*series_col) : nullptr;
  constexpr std::uint32_t kNull = Table::kNullCode;
  if (enc.aggregate == Aggregate::kNone) out.points.reserve(table.row_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (f_codes) {
      std::uint32_t f = (*f_codes)[r];
      if (f == kNull || !passes[f]) continue;
    }
    std::uint32_t xc = x_codes[r];
    if (xc == kNull) continue;
    std::uint32_t sk = 0;
    if (s_codes) {
      sk = (*s_codes)[r];
      if (sk == kNull) continue;
    }
    std::uint32_t yc = y_codes[r];
    if (enc.aggregate == Aggregate::kNone) {
      if (yc == kNull) continue;
      out.points.push_back(ChartPoint{x_keys[x_key(xc)], y_numbers[yc], series_names[sk]});
      series_used[sk] = 1;
      continue;
    }
    if (enc.aggregate != Aggregate::kCount && yc == kNull) continue;
    detail::Accumulator& acc = slot_of(x_key(xc), sk);
    ++acc.count;
    if (enc.aggregate != Aggregate::kCount) acc.sum += y_numbers[yc];
  }

  if (enc.aggregate != Aggregate::kNone) {
    out.points.reserve(groups.size());
    for (const Group& g : groups) {
      double value = 0.0;
      switch (enc.aggregate) {
        case Aggregate::kCount: value = static_cast<double>(g.acc.count); break;
        case Aggregate::kSum: value = g.acc.sum; break;
        case Aggregate::kAvg: value = g.acc.sum / static_cast<double>(g.acc.count); break;
        case Aggregate::kNone: break;
      }
      out.points.push_back(ChartPoint{x_keys[g.x], value, series_names[g.series]});
      series_used[g.series] = 1;
    }
  }

  if (tr.sort) {
    const Sort s = *tr.sort;
    std::stable_sort(out.points.begin(), out.points.end(),
                     [s](const ChartPoint& a, const ChartPoint& b) {
                       if (s.by == SortAxis::kX) {
                         return s.order == SortOrder::kAsc ? a.x < b.x : b.x < a.x;
                       }
                       return s.order == SortOrder::kAsc ? a.y < b.y : b.y < a.y;
                     });
  }
  if (tr.topk && out.points.size() > static_cast<std::size_t>(*tr.topk)) {
    out.points.resize(static_cast<std::size_t>(*tr.topk));
  }
  if (out.points.empty()) {
    throw ExecError(ExecError::Kind::EmptyResult, "no rows survive the transform");
  }
  for (const ChartPoint& p : out.points) {
    if (!std::isfinite(p.y)) {
      throw ExecError(ExecError::Kind::NonFinite, "aggregate overflowed");
    }
  }
  if (series_col) {
    std::vector<std::string_view> names;
    if (tr.topk) {
      for (const ChartPoint& p : out.points) names.push_back(p.series);
    } else {
      for (std::size_t i = 0; i < n_series; ++i) {
        if (series_used[i]) names.push_back(series_names[i]);
      }
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    out.legend = std::vector<std::string>(names.begin(), names.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chart-spec document.

inline constexpr int kChartSpecVersion = 1;

inline nlohmann::json cell_to_json(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return *d;
  if (const std::string* s = std::get_if<std::string>(&c)) return *s;
  if (const Timestamp* t = std::get_if<Timestamp>(&c)) return format_timestamp(*t);
  return nullptr;
}

inline std::string_view cell_type_name(const Cell& c) {
  if (std::holds_alternative<double>(c)) return "numeric";
  if (std::holds_alternative<Timestamp>(c)) return "temporal";
  return "categorical";
}

inline nlohmann::json to_chart_spec(const ChartData& data) {
  using nlohmann::json;
  json spec;
  spec["spec_version"] = kChartSpecVersion;
  spec["mark"] = std::string(to_string(data.mark));
  json x = {{"field", data.x_field},
            {"title", data.x_label},
            {"type", data.points.empty() ? "categorical"
                                         : std::string(cell_type_name(data.points.front().x))}};
  json y = {{"field", data.y_field},
            {"title", data.y_label},
            {"type", "numeric"},
            {"aggregate", std::string(to_string(data.aggregate))}};
  spec["encoding"] = {{"x", x}, {"y", y}};
  if (data.legend) {
    json legend = *data.legend;
    spec["encoding"]["color"] = {{"field", data.color_label.value_or("")},
                                 {"type", "categorical"},
                                 {"legend", legend}};
  }
  double total = 0.0;
  if (data.mark == Mark::kPie) {
    for (const ChartPoint& p : data.points) total += p.y;
  }
  json rows = json::array();
  for (const ChartPoint& p : data.points) {
    json row = {{"x", cell_to_json(p.x)}, {"y", p.y}};
    if (data.legend) row["c"] = p.series;
    if (data.mark == Mark::kPie) row["share"] = total != 0.0 ? p.y / total : 0.0;
    rows.push_back(std::move(row));
  }
  spec["data"] = std::move(rows);
  return spec;
}

// Maps the internal chart spec onto a Vega-Lite v5 document.
inline nlohmann::json to_vega_lite(const nlohmann::json& spec) {
  using nlohmann::json;
  auto vl_type = [](const std::string& t) {
    if (t == "numeric") return "quantitative";
    if (t == "temporal") return "temporal";
    return "nominal";
  };
  const std::string mark = spec.at("mark").get<std::string>();
  const json& enc = spec.at("encoding");
  json out;
  out["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
  out["data"] = {{"values", spec.at("data")}};
  json x = {{"field", "x"},
            {"type", vl_type(enc.at("x").at("type").get<std::string>())},
            {"title", enc.at("x").at("title")}};
  json y = {{"field", "y"}, {"type", "quantitative"}, {"title", enc.at("y").at("title")}};
  if (mark == "pie") {
    out["mark"] = "arc";
    out["encoding"] = {{"theta", y}, {"color", {{"field", "x"}, {"type", "nominal"},
                                                {"title", enc.at("x").at("title")}}}};
    return out;
  }
  out["mark"] = mark == "scatter" ? "point" : mark;
  out["encoding"] = {{"x", x}, {"y", y}};
  if (enc.contains("color")) {
    out["encoding"]["color"] = {{"field", "c"}, {"type", "nominal"},
                                {"title", enc.at("color").at("field")}};
  }
  return out;
}

}  // namespace vizrec
