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

// Visualization hints: short natural-language suggestions, each bound to a
// partial-query constraint and the best search results that satisfy it.
//
// Selecting k hints under a budget B on the total number of attached
// visualizations is a budgeted maximum coverage problem; select_top_k() is the
// greedy sort-then-fill heuristic and select_top_k_exact() a subset
// enumeration for small instances.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vizrec/error.hpp"
#include "vizrec/graph.hpp"
#include "vizrec/query.hpp"
#include "vizrec/search.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

enum class HintKind {
  kExploreFieldY,
  kCompareFieldCategories,
  kTrendOverTime,
  kBreakdownByChart,
  kFocusAggregate,
};

inline constexpr HintKind kAllHintKinds[] = {
    HintKind::kExploreFieldY, HintKind::kCompareFieldCategories, HintKind::kTrendOverTime,
    HintKind::kBreakdownByChart, HintKind::kFocusAggregate};

inline std::string_view to_string(HintKind k) {
  switch (k) {
    case HintKind::kExploreFieldY: return "explore_field_y";
    case HintKind::kCompareFieldCategories: return "compare_field_categories";
    case HintKind::kTrendOverTime: return "trend_over_time";
    case HintKind::kBreakdownByChart: return "breakdown_by_chart";
    case HintKind::kFocusAggregate: return "focus_aggregate";
  }
  return "explore_field_y";
}

inline std::optional<HintKind> hint_kind_from_string(std::string_view s) {
  for (HintKind k : kAllHintKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

// Field hints use `field` (and `field_type` when known); chart hints use
// `mark`; aggregate hints use `field` and `aggregate`.
struct HintTarget {
  std::string field;
  std::optional<SemanticType> field_type;
  std::optional<Mark> mark;
  std::optional<Aggregate> aggregate;
};

inline std::string target_label(HintKind kind, const HintTarget& t) {
  switch (kind) {
    case HintKind::kBreakdownByChart:
      return t.mark ? std::string(to_string(*t.mark)) : std::string();
    case HintKind::kFocusAggregate:
      return std::string(to_string(t.aggregate.value_or(Aggregate::kNone))) + "(" + t.field + ")";
    default:
      return t.field;
  }
}

inline std::string render_hint_text(HintKind kind, const HintTarget& target) {
  auto inapplicable = [&](const std::string& why) {
    return TemplateError(TemplateError::Kind::Inapplicable,
                         std::string(to_string(kind)) + ": " + why);
  };
  auto need_field = [&] {
    if (target.field.empty()) throw inapplicable("a field target is required");
  };
  auto need_numeric = [&] {
    need_field();
    if (target.field_type && *target.field_type != SemanticType::kNumeric) {
      throw inapplicable("field '" + target.field + "' is not numeric");
    }
  };
  switch (kind) {
    case HintKind::kExploreFieldY:
      need_field();
      return "Explore " + target.field + " over categories or time";
    case HintKind::kCompareFieldCategories:
      need_numeric();
      return "Compare " + target.field + " to different categories";
    case HintKind::kTrendOverTime:
      need_numeric();
      return "Show how " + target.field + " changes over time";
    case HintKind::kBreakdownByChart:
      if (!target.mark) throw inapplicable("a mark target is required");
      return "See this data as a " + std::string(to_string(*target.mark)) + " chart";
    case HintKind::kFocusAggregate:
      need_field();
      if (!target.aggregate || *target.aggregate == Aggregate::kNone) {
        throw inapplicable("an aggregate other than NONE is required");
      }
      return "Summarize " + target.field + " using " + std::string(to_string(*target.aggregate));
  }
  throw inapplicable("unknown template");
}

// Keep-set on one graph layer. A query satisfies a constraint when its clause
// on that layer is in `keep`.
struct HintConstraint {
  Layer layer = Layer::kYField;
  std::set<Action> keep;

  friend bool operator==(const HintConstraint&, const HintConstraint&) = default;
};

struct HintVisualization {
  VisQuery query;
  std::string canonical;
  double crf = 0.0;
  double r_v = 0.0;  // decayed reward
};

struct Hint {
  int id = 0;
  HintKind kind = HintKind::kExploreFieldY;
  HintTarget target;
  std::string text;
  std::vector<HintVisualization> visualizations;  // by r_v, descending
  std::size_t cost = 0;
  std::vector<HintConstraint> constraints;

  double total_reward() const {
    double s = 0.0;
    for (const HintVisualization& v : visualizations) s += v.r_v;
    return s;
  }
  double avg_score() const {
    return visualizations.empty() ? 0.0
                                  : total_reward() / static_cast<double>(visualizations.size());
  }
};

struct HintSelection {
  std::vector<Hint> chosen;
  double total_reward = 0.0;
  std::size_t total_cost = 0;
  std::size_t k = 0;
  std::size_t budget = 0;
};

struct HintConfig {
  std::size_t k = 9;
  std::size_t budget = 40;
  std::size_t per_hint_cap = 8;  // l
};

inline double decay_coefficient(std::size_t n_total, std::size_t n_viz) {
  if (n_viz < 1 || n_viz > n_total) {
    throw RangeError(RangeError::Kind::OutOfRange, "decay requires 1 <= N_viz <= N_total");
  }
  return std::log(static_cast<double>(n_total) / static_cast<double>(n_viz));
}

// crf * delta / log(N_total); 0 when the visualization is in every hint.
inline double decayed_reward(double crf, std::size_t n_total, std::size_t n_viz) {
  double delta = decay_coefficient(n_total, n_viz);
  if (n_viz == n_total) return 0.0;
  return std::min(crf, crf * delta / std::log(static_cast<double>(n_total)));
}

// The clause a complete query would take on `layer`, if the layer is one of
// the encoding layers a hint can constrain.
inline std::optional<Action> clause_of(const VisQuery& q, const Table& table, Layer layer) {
  switch (layer) {
    case Layer::kMark: return Action{layer, static_cast<std::int32_t>(q.mark)};
    case Layer::kXField:
      if (auto c = table.find_column(q.encoding.x_field)) {
        return Action{layer, static_cast<std::int32_t>(*c)};
      }
      return std::nullopt;
    case Layer::kYField:
      if (auto c = table.find_column(q.encoding.y_field)) {
        return Action{layer, static_cast<std::int32_t>(*c)};
      }
      return std::nullopt;
    case Layer::kAggregate: return Action{layer, static_cast<std::int32_t>(q.encoding.aggregate)};
    default: return std::nullopt;
  }
}

inline bool satisfies(const VisQuery& q, const Table& table,
                      const std::vector<HintConstraint>& constraints) {
  for (const HintConstraint& c : constraints) {
    auto a = clause_of(q, table, c.layer);
    if (!a || !c.keep.count(*a)) return false;
  }
  return true;
}

namespace detail {

struct HintDraft {
  HintKind kind;
  HintTarget target;
  std::vector<HintConstraint> constraints;
};

inline std::vector<HintDraft> hint_drafts(const QueryGraph& graph, const Table& table) {
  auto positive = [&](Layer layer, std::int32_t value) {
    auto id = graph.find(Action{layer, value});
    return id && graph.node(*id).mean() > 0.0;
  };
  auto columns_of = [&](SemanticType t) {
    std::set<Action> keep;
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (table.type_of(c) == t) keep.insert(Action{Layer::kXField, static_cast<std::int32_t>(c)});
    }
    return keep;
  };
  auto field_target = [&](std::size_t c) {
    return HintTarget{table.column(c).name, table.type_of(c), std::nullopt, std::nullopt};
  };
  auto y_keep = [](std::size_t c) {
    return HintConstraint{Layer::kYField, {Action{Layer::kYField, static_cast<std::int32_t>(c)}}};
  };
  const std::set<Action> categorical_x = columns_of(SemanticType::kCategorical);
  const std::set<Action> temporal_x = columns_of(SemanticType::kTemporal);
  const std::size_t m = table.column_count();

  std::vector<HintDraft> drafts;
  for (std::size_t c = 0; c < m; ++c) {
    if (!positive(Layer::kYField, static_cast<std::int32_t>(c))) continue;
    drafts.push_back({HintKind::kExploreFieldY, field_target(c), {y_keep(c)}});
  }
  if (!categorical_x.empty()) {
    for (std::size_t c = 0; c < m; ++c) {
      if (table.type_of(c) != SemanticType::kNumeric) continue;
      if (!positive(Layer::kYField, static_cast<std::int32_t>(c))) continue;
      drafts.push_back({HintKind::kCompareFieldCategories, field_target(c),
                        {y_keep(c), HintConstraint{Layer::kXField, categorical_x}}});
    }
  }
  if (!temporal_x.empty()) {
    for (std::size_t c = 0; c < m; ++c) {
      if (table.type_of(c) != SemanticType::kNumeric) continue;
      if (!positive(Layer::kYField, static_cast<std::int32_t>(c))) continue;
      drafts.push_back({HintKind::kTrendOverTime, field_target(c),
                        {y_keep(c), HintConstraint{Layer::kXField, temporal_x}}});
    }
  }
  for (Mark mk : kAllMarks) {
    if (!positive(Layer::kMark, static_cast<std::int32_t>(mk))) continue;
    HintTarget t;
    t.mark = mk;
    drafts.push_back({HintKind::kBreakdownByChart, t,
                      {HintConstraint{Layer::kMark,
                                      {Action{Layer::kMark, static_cast<std::int32_t>(mk)}}}}});
  }
  for (std::size_t c = 0; c < m; ++c) {
    if (!positive(Layer::kYField, static_cast<std::int32_t>(c))) continue;
    for (Aggregate a : {Aggregate::kCount, Aggregate::kSum, Aggregate::kAvg}) {
      if (!positive(Layer::kAggregate, static_cast<std::int32_t>(a))) continue;
      HintTarget t = field_target(c);
      t.aggregate = a;
      drafts.push_back(
          {HintKind::kFocusAggregate, t,
           {y_keep(c), HintConstraint{Layer::kAggregate,
                                      {Action{Layer::kAggregate, static_cast<std::int32_t>(a)}}}}});
    }
  }
  return drafts;
}

}  // namespace detail

// One hint per applicable (template, target) whose target node has positive
// mean reward and which has at least one consistent query in the result pool.
// Ids are 1-based in generation order.
inline std::vector<Hint> generate_candidate_hints(const QueryGraph& graph,
                                                  const SearchResult& result, const Table& table,
                                                  std::size_t per_hint_cap) {
  std::vector<Hint> hints;
  if (per_hint_cap == 0) return hints;
  for (detail::HintDraft& d : detail::hint_drafts(graph, table)) {
    Hint h;
    h.kind = d.kind;
    h.target = std::move(d.target);
    h.constraints = std::move(d.constraints);
    for (const RankedEntry& e : result.pool) {
      if (h.visualizations.size() >= per_hint_cap) break;
      if (satisfies(e.query, table, h.constraints)) {
        h.visualizations.push_back({e.query, e.canonical, e.reward.crf, 0.0});
      }
    }
    if (h.visualizations.empty()) continue;
    h.text = render_hint_text(h.kind, h.target);
    hints.push_back(std::move(h));
  }

  std::map<std::string, std::size_t> containing;
  for (const Hint& h : hints) {
    for (const HintVisualization& v : h.visualizations) ++containing[v.canonical];
  }
  const std::size_t n_total = hints.size();
  int next_id = 1;
  for (Hint& h : hints) {
    h.id = next_id++;
    for (HintVisualization& v : h.visualizations) {
      v.r_v = decayed_reward(v.crf, n_total, containing[v.canonical]);
    }
    std::stable_sort(h.visualizations.begin(), h.visualizations.end(),
                     [](const HintVisualization& a, const HintVisualization& b) {
                       return a.r_v > b.r_v;
                     });
    h.cost = h.visualizations.size();
  }
  return hints;
}

namespace detail {

inline HintSelection make_selection(std::vector<Hint> chosen, std::size_t k, std::size_t budget) {
  HintSelection s;
  s.k = k;
  s.budget = budget;
  for (const Hint& h : chosen) {
    s.total_reward += h.total_reward();
    s.total_cost += h.cost;
  }
  s.chosen = std::move(chosen);
  return s;
}

}  // namespace detail

// Filter by cost <= B, sort by average decayed reward (then total reward,
// then id), and take greedily while the count and budget allow.
inline HintSelection select_top_k(const std::vector<Hint>& hints, std::size_t k,
                                  std::size_t budget) {
  std::vector<const Hint*> valid;
  for (const Hint& h : hints) {
    if (h.cost <= budget) valid.push_back(&h);
  }
  std::stable_sort(valid.begin(), valid.end(), [](const Hint* a, const Hint* b) {
    double aa = a->avg_score(), ba = b->avg_score();
    if (aa != ba) return aa > ba;
    double at = a->total_reward(), bt = b->total_reward();
    if (at != bt) return at > bt;
    return a->id < b->id;
  });
  std::vector<Hint> chosen;
  std::size_t cost = 0;
  for (const Hint* h : valid) {
    if (chosen.size() < k && cost + h->cost <= budget) {
      chosen.push_back(*h);
      cost += h->cost;
    }
    if (chosen.size() == k) break;
  }
  return detail::make_selection(std::move(chosen), k, budget);
}

inline constexpr std::size_t kExactHintLimit = 20;

// Best subset with at most k hints and cost <= B. Ties go to the
// lexicographically smallest sorted id list.
inline HintSelection select_top_k_exact(const std::vector<Hint>& hints, std::size_t k,
                                        std::size_t budget) {
  const std::size_t n = hints.size();
  if (n > kExactHintLimit) {
    throw OracleError(OracleError::Kind::TooLarge,
                      "exact selection supports at most 20 hints, got " + std::to_string(n));
  }
  std::vector<double> reward(n);
  for (std::size_t i = 0; i < n; ++i) reward[i] = hints[i].total_reward();

  auto ids_of = [&](std::uint32_t mask) {
    std::vector<int> ids;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) ids.push_back(hints[i].id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  std::uint32_t best_mask = 0;
  double best = 0.0;
  std::vector<int> best_ids;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > k) continue;
    std::size_t cost = 0;
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        cost += hints[i].cost;
        f += reward[i];
      }
    }
    if (cost > budget) continue;
    if (f < best) continue;
    std::vector<int> ids = ids_of(mask);
    if (f > best || ids < best_ids) {
      best = f;
      best_mask = mask;
      best_ids = std::move(ids);
    }
  }
  std::vector<Hint> chosen;
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask & (1u << i)) chosen.push_back(hints[i]);
  }
  return detail::make_selection(std::move(chosen), k, budget);
}

inline nlohmann::json hint_to_json(const Hint& h) {
  nlohmann::json viz = nlohmann::json::array();
  for (const HintVisualization& v : h.visualizations) viz.push_back(v.canonical);
  return {{"id", h.id},
          {"text", h.text},
          {"kind", std::string(to_string(h.kind))},
          {"target", target_label(h.kind, h.target)},
          {"cost", h.cost},
          {"avg_score", h.avg_score()},
          {"visualizations", std::move(viz)}};
}

}  // namespace vizrec
