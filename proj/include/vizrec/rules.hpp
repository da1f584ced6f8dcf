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

// Chart-construction rules. The same predicates serve two purposes:
//
//  * legal_actions() prunes the next-layer candidates of a partial query,
//    using only the selection and transform rules that are decidable from the
//    clauses chosen so far;
//  * check_validity() evaluates every rule, including the data-dependent
//    visualization rules, on an executed query.
//
// A rule answers kUnknown while a field it needs is undecided, so pruning
// never removes an action that still admits a valid completion.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vizrec/chart.hpp"
#include "vizrec/query.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

enum class RuleStage { kSelection, kTransform, kVisualization };

inline std::string_view to_string(RuleStage s) {
  switch (s) {
    case RuleStage::kSelection: return "selection";
    case RuleStage::kTransform: return "transform";
    case RuleStage::kVisualization: return "visualization";
  }
  return "selection";
}

enum class Verdict { kPass, kFail, kUnknown };

// What a rule can see of a (possibly partial) query. Outer optionals mean
// "decided"; inner ones "present".
struct RuleSubject {
  std::optional<Mark> mark;
  std::optional<std::size_t> x;
  std::optional<std::size_t> y;
  std::optional<SemanticType> x_type;
  std::optional<SemanticType> y_type;
  std::optional<Aggregate> aggregate;
  std::optional<std::optional<std::size_t>> group;
  std::optional<std::optional<BinGranularity>> bin;
  const ChartData* data = nullptr;
};

struct RuleThresholds {
  std::size_t max_bar_categories = 20;
  std::size_t max_pie_slices = 10;
  std::size_t min_line_points = 3;
};

struct Rule {
  std::string id;
  RuleStage stage = RuleStage::kSelection;
  std::string description;
  std::function<Verdict(const RuleSubject&, const RuleThresholds&)> check;
};

struct Validity {
  int s_k = 0;
  std::vector<std::string> violated;  // in rule-set order
};

namespace detail {

inline Verdict pass_if(bool ok) { return ok ? Verdict::kPass : Verdict::kFail; }

inline std::size_t distinct_x(const ChartData& d) { return distinct_x_count(d.points); }

inline std::vector<Rule> default_rules() {
  using S = RuleSubject;
  using T = RuleThresholds;
  std::vector<Rule> r;
  r.push_back({"bar.x_discrete", RuleStage::kSelection,
               "bar x must be categorical or temporal (or bucket-binned numeric)",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kBar || !s.x_type) return Verdict::kPass;
                 if (*s.x_type != SemanticType::kNumeric) return Verdict::kPass;
                 if (!s.bin) return Verdict::kUnknown;
                 return pass_if(*s.bin == BinGranularity::kBucket);
               }});
  r.push_back({"bar.y_numeric_or_count", RuleStage::kSelection,
               "bar y must be numeric unless the aggregate is COUNT",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kBar || !s.y_type) return Verdict::kPass;
                 if (*s.y_type == SemanticType::kNumeric) return Verdict::kPass;
                 if (!s.aggregate) return Verdict::kUnknown;
                 return pass_if(*s.aggregate == Aggregate::kCount);
               }});
  r.push_back({"bar.max_categories", RuleStage::kVisualization,
               "bar charts show at most 20 distinct x values",
               [](const S& s, const T& t) {
                 if (s.mark != Mark::kBar || !s.data) return Verdict::kPass;
                 return pass_if(distinct_x(*s.data) <= t.max_bar_categories);
               }});
  r.push_back({"pie.x_categorical", RuleStage::kSelection, "pie x must be categorical",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kPie || !s.x_type) return Verdict::kPass;
                 return pass_if(*s.x_type == SemanticType::kCategorical);
               }});
  r.push_back({"pie.y_numeric_or_count", RuleStage::kSelection,
               "pie y must be numeric unless the aggregate is COUNT",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kPie || !s.y_type) return Verdict::kPass;
                 if (*s.y_type == SemanticType::kNumeric) return Verdict::kPass;
                 if (!s.aggregate) return Verdict::kUnknown;
                 return pass_if(*s.aggregate == Aggregate::kCount);
               }});
  r.push_back({"pie.no_avg", RuleStage::kTransform,
               "pie slices are parts of a whole: COUNT or SUM only, no AVG or raw rows",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kPie || !s.aggregate) return Verdict::kPass;
                 return pass_if(*s.aggregate == Aggregate::kCount ||
                                *s.aggregate == Aggregate::kSum);
               }});
  r.push_back({"pie.nonnegative_y", RuleStage::kVisualization,
               "pie slice values must not be negative",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kPie || !s.data) return Verdict::kPass;
                 for (const ChartPoint& p : s.data->points) {
                   if (p.y < 0.0) return Verdict::kFail;
                 }
                 return Verdict::kPass;
               }});
  r.push_back({"pie.min_two_slices", RuleStage::kVisualization,
               "pie charts need at least two distinct x values",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kPie || !s.data) return Verdict::kPass;
                 return pass_if(distinct_x(*s.data) >= 2);
               }});
  r.push_back({"pie.max_slices", RuleStage::kVisualization,
               "pie charts show at most 10 slices",
               [](const S& s, const T& t) {
                 if (s.mark != Mark::kPie || !s.data) return Verdict::kPass;
                 return pass_if(distinct_x(*s.data) <= t.max_pie_slices);
               }});
  r.push_back({"line.x_ordered", RuleStage::kSelection,
               "line x must be temporal or numeric",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kLine || !s.x_type) return Verdict::kPass;
                 return pass_if(*s.x_type != SemanticType::kCategorical);
               }});
  r.push_back({"line.min_points", RuleStage::kVisualization,
               "line charts need at least 3 points",
               [](const S& s, const T& t) {
                 if (s.mark != Mark::kLine || !s.data) return Verdict::kPass;
                 return pass_if(s.data->points.size() >= t.min_line_points);
               }});
  r.push_back({"scatter.both_numeric", RuleStage::kSelection,
               "scatter x and y must be numeric; raw values or grouped means only",
               [](const S& s, const T&) {
                 if (s.mark != Mark::kScatter) return Verdict::kPass;
                 if (s.x_type && *s.x_type != SemanticType::kNumeric) return Verdict::kFail;
                 if (s.y_type && *s.y_type != SemanticType::kNumeric) return Verdict::kFail;
                 if (!s.aggregate) return Verdict::kUnknown;
                 if (*s.aggregate == Aggregate::kNone) return Verdict::kPass;
                 if (*s.aggregate != Aggregate::kAvg) return Verdict::kFail;
                 if (!s.group) return Verdict::kUnknown;
                 return pass_if(s.group->has_value());
               }});
  r.push_back({"agg.requires_group", RuleStage::kTransform,
               "an aggregate needs a group or bin; NONE allows neither",
               [](const S& s, const T&) {
                 if (!s.aggregate) return Verdict::kPass;
                 bool group_known = s.group.has_value();
                 bool bin_known = s.bin.has_value();
                 bool has_group = group_known && s.group->has_value();
                 bool has_bin = bin_known && s.bin->has_value();
                 if (*s.aggregate == Aggregate::kNone) {
                   if (has_group || has_bin) return Verdict::kFail;
                   return group_known && bin_known ? Verdict::kPass : Verdict::kUnknown;
                 }
                 if (has_group || has_bin) return Verdict::kPass;
                 return group_known && bin_known ? Verdict::kFail : Verdict::kUnknown;
               }});
  r.push_back({"agg.categorical_y_count_only", RuleStage::kTransform,
               "a non-numeric y admits COUNT only",
               [](const S& s, const T&) {
                 if (!s.y_type || *s.y_type == SemanticType::kNumeric || !s.aggregate) {
                   return Verdict::kPass;
                 }
                 return pass_if(*s.aggregate == Aggregate::kCount);
               }});
  r.push_back({"general.x_not_equal_y_unless_scatter", RuleStage::kSelection,
               "x and y must differ except for a raw scatter plot",
               [](const S& s, const T&) {
                 if (!s.x || !s.y || *s.x != *s.y) return Verdict::kPass;
                 if (s.mark && *s.mark != Mark::kScatter) return Verdict::kFail;
                 if (s.aggregate && *s.aggregate != Aggregate::kNone) return Verdict::kFail;
                 return s.mark && s.aggregate ? Verdict::kPass : Verdict::kUnknown;
               }});
  return r;
}

inline BinGranularity granularity_of(BinOption o) {
  switch (o) {
    case BinOption::kYear: return BinGranularity::kYear;
    case BinOption::kMonth: return BinGranularity::kMonth;
    case BinOption::kWeekday: return BinGranularity::kWeekday;
    default: return BinGranularity::kBucket;
  }
}

}  // namespace detail

inline RuleSubject subject_of(const PartialQuery& q, const Table& table) {
  RuleSubject s;
  if (auto a = q.get(Layer::kMark)) s.mark = static_cast<Mark>(a->value);
  if (auto a = q.get(Layer::kXField)) {
    s.x = static_cast<std::size_t>(a->value);
    s.x_type = table.type_of(*s.x);
  }
  if (auto a = q.get(Layer::kYField)) {
    s.y = static_cast<std::size_t>(a->value);
    s.y_type = table.type_of(*s.y);
  }
  if (auto a = q.get(Layer::kAggregate)) s.aggregate = static_cast<Aggregate>(a->value);
  if (auto a = q.get(Layer::kGroupField)) {
    s.group = std::optional<std::size_t>(static_cast<std::size_t>(a->value));
  } else if (q.skips(Layer::kGroupField)) {
    s.group = std::optional<std::size_t>();
  }
  if (auto a = q.get(Layer::kBin)) {
    if (a->value == 0) {
      s.bin = std::optional<BinGranularity>();
    } else {
      s.bin = std::optional<BinGranularity>(
          detail::granularity_of(static_cast<BinOption>(a->value)));
    }
  } else if (!q.has_layer(Layer::kBin)) {
    s.bin = std::optional<BinGranularity>();
  }
  return s;
}

// Returns nullopt when the query names a field the table does not have.
inline std::optional<RuleSubject> subject_of(const VisQuery& q, const Table& table,
                                             const ChartData* data) {
  auto x = table.find_column(q.encoding.x_field);
  auto y = table.find_column(q.encoding.y_field);
  if (!x || !y) return std::nullopt;
  RuleSubject s;
  s.mark = q.mark;
  s.x = *x;
  s.y = *y;
  s.x_type = table.type_of(*x);
  s.y_type = table.type_of(*y);
  s.aggregate = q.encoding.aggregate;
  if (q.transform.group_field) {
    auto g = table.find_column(*q.transform.group_field);
    if (!g) return std::nullopt;
    s.group = std::optional<std::size_t>(*g);
  } else {
    s.group = std::optional<std::size_t>();
  }
  if (q.transform.bin) {
    s.bin = std::optional<BinGranularity>(q.transform.bin->granularity);
  } else {
    s.bin = std::optional<BinGranularity>();
  }
  s.data = data;
  return s;
}

// Immutable after construction.
class RuleSet {
 public:
  RuleSet() : rules_(detail::default_rules()) {}
  explicit RuleSet(RuleThresholds thresholds)
      : rules_(detail::default_rules()), thresholds_(thresholds) {}

  const std::vector<Rule>& rules() const { return rules_; }
  const RuleThresholds& thresholds() const { return thresholds_; }
  std::size_t size() const { return rules_.size(); }

  RuleSet without(const std::string& id) const {
    RuleSet copy = *this;
    std::erase_if(copy.rules_, [&](const Rule& r) { return r.id == id; });
    return copy;
  }

  // First failing rule among the pre-execution stages, if any.
  std::optional<std::string> static_violation(const RuleSubject& s) const {
    for (const Rule& r : rules_) {
      if (r.stage == RuleStage::kVisualization) continue;
      if (r.check(s, thresholds_) == Verdict::kFail) return r.id;
    }
    return std::nullopt;
  }

  std::vector<std::string> violations(const RuleSubject& s) const {
    std::vector<std::string> out;
    for (const Rule& r : rules_) {
      if (r.check(s, thresholds_) == Verdict::kFail) out.push_back(r.id);
    }
    return out;
  }

 private:
  std::vector<Rule> rules_;
  RuleThresholds thresholds_;
};

namespace detail {

// Type-level constraints of the extension layers; not part of the rule
// inventory because execution would reject these outright.
inline bool structurally_legal(const PartialQuery& q, Action a, const Table& table) {
  switch (a.layer) {
    case Layer::kBin: {
      if (a.value == 0) return true;
      auto x = q.get(Layer::kXField);
      if (!x) return true;
      SemanticType t = table.type_of(static_cast<std::size_t>(x->value));
      if (static_cast<BinOption>(a.value) == BinOption::kBucket) {
        return t == SemanticType::kNumeric;
      }
      return t == SemanticType::kTemporal;
    }
    case Layer::kTopK: {
      if (a.value == 0) return true;
      auto s = q.get(Layer::kSort);
      return s && s->value != 0;
    }
    default:
      return true;
  }
}

}  // namespace detail

// The subset of `candidates` (all from the state's next layer) that does not
// already violate a decidable rule.
inline std::vector<Action> legal_actions(const PartialQuery& state,
                                         const std::vector<Action>& candidates,
                                         const Table& table, const RuleSet& rules) {
  std::vector<Action> out;
  out.reserve(candidates.size());
  for (const Action& a : candidates) {
    if (!detail::structurally_legal(state, a, table)) continue;
    RuleSubject s = subject_of(state.with(a), table);
    if (!rules.static_violation(s)) out.push_back(a);
  }
  return out;
}

inline Validity check_validity(const VisQuery& query, const Table& table,
                               const ChartData& data, const RuleSet& rules = RuleSet()) {
  Validity v;
  auto subject = subject_of(query, table, &data);
  if (!subject) {
    v.violated.push_back("general.unknown_field");
    return v;
  }
  v.violated = rules.violations(*subject);
  v.s_k = v.violated.empty() ? 1 : 0;
  return v;
}

}  // namespace vizrec
