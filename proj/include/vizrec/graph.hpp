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

// The visualization query graph: one node per (layer, operation), shared by
// every query that uses the operation. Search statistics live on edges; node
// totals are kept alongside for diagnostics and hint generation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "vizrec/error.hpp"
#include "vizrec/query.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

struct NodeId {
  std::uint32_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

struct GraphConfig {
  bool bin = false;
  bool sort = false;
  bool topk = false;
  bool filter = false;
  std::vector<std::int64_t> topk_values = {5, 10};
  // Equality filters are offered only on categorical columns this small.
  std::size_t filter_max_distinct = 20;
};

struct EdgeStats {
  std::uint64_t visit_count = 0;
  double reward_sum = 0.0;

  double mean() const {
    return reward_sum / static_cast<double>(std::max<std::uint64_t>(1, visit_count));
  }
};

struct GraphNode {
  NodeId id;
  Layer layer = Layer::kRoot;
  Action action;
  std::string label;
  std::uint64_t visit_count = 0;
  double reward_sum = 0.0;

  double mean() const {
    return reward_sum / static_cast<double>(std::max<std::uint64_t>(1, visit_count));
  }
};

struct EdgeRef {
  NodeId from;
  NodeId to;

  friend bool operator==(const EdgeRef&, const EdgeRef&) = default;
};

struct Successor {
  NodeId node;
  Action action;
  EdgeStats stats;
};

struct TreeEquivalence {
  std::uint64_t graph_nodes;
  std::uint64_t tree_nodes;
  double reduction_ratio;
};

// Node counts of the default layering: 4 marks + m x + m y + 4 aggregates +
// m group fields, against 4 * m^3 * 4 independent tree paths.
inline TreeEquivalence count_tree_equivalent(std::uint64_t m) {
  if (m < 1) throw RangeError(RangeError::Kind::OutOfRange, "m must be >= 1");
  std::uint64_t graph = 3 * m + 8;
  std::uint64_t tree = 16 * m * m * m;
  return {graph, tree, static_cast<double>(tree) / static_cast<double>(graph)};
}

class QueryGraph {
 public:
  QueryGraph() = default;

  static constexpr NodeId root() { return NodeId{0}; }

  const std::vector<Layer>& layers() const { return layers_; }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  // Excludes the virtual root.
  std::size_t node_count() const { return nodes_.size() - 1; }
  std::size_t column_count() const { return column_count_; }
  const GraphConfig& config() const { return config_; }

  const GraphNode& node(NodeId id) const {
    if (id.value >= nodes_.size()) {
      throw GraphError(GraphError::Kind::UnknownNode,
                       "node " + std::to_string(id.value) + " is not in the graph");
    }
    return nodes_[id.value];
  }

  std::optional<NodeId> find(Action a) const {
    auto it = by_action_.find(a);
    if (it == by_action_.end()) return std::nullopt;
    return it->second;
  }

  NodeId node_for(Action a) const {
    auto id = find(a);
    if (!id) {
      throw GraphError(GraphError::Kind::UnknownNode,
                       "no node for operation in layer " + std::string(to_string(a.layer)));
    }
    return *id;
  }

  std::vector<NodeId> nodes_in(Layer layer) const {
    std::vector<NodeId> out;
    for (const GraphNode& n : nodes_) {
      if (n.layer == layer) out.push_back(n.id);
    }
    return out;
  }

  PartialQuery empty_query() const { return PartialQuery(layers_); }

  // The node a partial query currently sits on.
  NodeId position(const PartialQuery& q) const {
    if (q.clauses().empty()) return root();
    return node_for(q.clauses().back());
  }

  EdgeStats edge(NodeId from, NodeId to) const {
    auto it = edges_.find(edge_key(from, to));
    return it == edges_.end() ? EdgeStats{} : it->second;
  }

  std::size_t edge_count() const { return edges_.size(); }

  // Next-layer candidates from `from` for the state `q`, frozen nodes
  // excluded. Rule legality is not applied here.
  std::vector<Successor> successors(NodeId from, const PartialQuery& q) const {
    node(from);
    std::vector<Successor> out;
    auto next = q.next_layer();
    if (!next) return out;
    auto it = layer_nodes_.find(*next);
    if (it == layer_nodes_.end()) return out;
    for (NodeId id : it->second) {
      if (frozen_.count(id.value)) continue;
      out.push_back(Successor{id, nodes_[id.value].action, edge(from, id)});
    }
    return out;
  }

  // Adds one visit and `reward` to every edge and node on a root-anchored
  // path. The root's own counter is the total number of backpropagations.
  void backpropagate(std::span<const EdgeRef> path, double reward) {
    if (!(reward >= 0.0 && reward <= 1.0)) {
      throw RangeError(RangeError::Kind::OutOfRange, "reward must be in [0, 1]");
    }
    validate_path(path);
    nodes_[0].visit_count += 1;
    nodes_[0].reward_sum += reward;
    for (const EdgeRef& e : path) {
      EdgeStats& s = edges_[edge_key(e.from, e.to)];
      s.visit_count += 1;
      s.reward_sum += reward;
      nodes_[e.to.value].visit_count += 1;
      nodes_[e.to.value].reward_sum += reward;
    }
  }

  // Freezes every node of `layer` outside `keep`. Repeated calls intersect.
  // Throws (leaving the graph unchanged) if no node of the layer would stay
  // selectable.
  void freeze_except(Layer layer, const std::set<Action>& keep) {
    auto it = layer_nodes_.find(layer);
    if (it == layer_nodes_.end()) {
      throw GraphError(GraphError::Kind::UnknownLayer,
                       "layer " + std::string(to_string(layer)) + " is not enabled");
    }
    std::vector<std::uint32_t> to_freeze;
    std::size_t remaining = 0;
    for (NodeId id : it->second) {
      bool kept = keep.count(nodes_[id.value].action) > 0;
      if (!kept) {
        to_freeze.push_back(id.value);
      } else if (!frozen_.count(id.value)) {
        ++remaining;
      }
    }
    if (remaining == 0) {
      throw FreezeError(FreezeError::Kind::EmptyKeepSet,
                        "no selectable " + std::string(to_string(layer)) +
                            " operation would remain");
    }
    for (std::uint32_t id : to_freeze) frozen_.insert(id);
  }

  void unfreeze_all() { frozen_.clear(); }

  bool is_frozen(NodeId id) const { return frozen_.count(id.value) > 0; }

  std::vector<NodeId> frozen() const {
    std::vector<NodeId> out;
    for (std::uint32_t v : frozen_) out.push_back(NodeId{v});
    std::sort(out.begin(), out.end());
    return out;
  }

  // The filter predicate behind a filter-layer option (index >= 1).
  const Filter& filter_option(std::int32_t index) const {
    return filter_options_.at(static_cast<std::size_t>(index - 1));
  }
  std::int64_t topk_option(std::int32_t index) const {
    return config_.topk_values.at(static_cast<std::size_t>(index - 1));
  }
  double bucket_width(std::size_t column) const { return bucket_widths_.at(column); }

  // Builds the query spelled by a complete path.
  VisQuery spell(const PartialQuery& q, const Table& table) const {
    VisQuery out;
    auto col = [&](Layer l) -> const std::string& {
      return table.column(static_cast<std::size_t>(q.get(l)->value)).name;
    };
    out.mark = static_cast<Mark>(q.get(Layer::kMark).value().value);
    out.encoding.x_field = col(Layer::kXField);
    out.encoding.y_field = col(Layer::kYField);
    out.encoding.aggregate = static_cast<Aggregate>(q.get(Layer::kAggregate).value().value);
    if (q.get(Layer::kGroupField)) out.transform.group_field = col(Layer::kGroupField);
    if (auto b = q.get(Layer::kBin); b && b->value != 0) {
      Bin bin;
      bin.field = out.encoding.x_field;
      switch (static_cast<BinOption>(b->value)) {
        case BinOption::kYear: bin.granularity = BinGranularity::kYear; break;
        case BinOption::kMonth: bin.granularity = BinGranularity::kMonth; break;
        case BinOption::kWeekday: bin.granularity = BinGranularity::kWeekday; break;
        default:
          bin.granularity = BinGranularity::kBucket;
          bin.width = bucket_width(static_cast<std::size_t>(q.get(Layer::kXField)->value));
          break;
      }
      out.transform.bin = bin;
    }
    if (auto s = q.get(Layer::kSort); s && s->value != 0) {
      out.transform.sort = sort_for(static_cast<SortOption>(s->value));
    }
    if (auto t = q.get(Layer::kTopK); t && t->value != 0) {
      out.transform.topk = topk_option(t->value);
    }
    if (auto f = q.get(Layer::kFilter); f && f->value != 0) {
      out.transform.filter = filter_option(f->value);
    }
    return out;
  }

  // Maps a query back onto the actions of this graph; nullopt when the query
  // uses an operation the graph does not contain.
  std::optional<PartialQuery> path_of(const VisQuery& q, const Table& table) const {
    PartialQuery out(layers_);
    auto x = table.find_column(q.encoding.x_field);
    auto y = table.find_column(q.encoding.y_field);
    if (!x || !y) return std::nullopt;
    out.push({Layer::kMark, static_cast<std::int32_t>(q.mark)});
    out.push({Layer::kXField, static_cast<std::int32_t>(*x)});
    out.push({Layer::kYField, static_cast<std::int32_t>(*y)});
    out.push({Layer::kAggregate, static_cast<std::int32_t>(q.encoding.aggregate)});
    if (q.encoding.aggregate != Aggregate::kNone) {
      if (!q.transform.group_field) return std::nullopt;
      auto g = table.find_column(*q.transform.group_field);
      if (!g) return std::nullopt;
      out.push({Layer::kGroupField, static_cast<std::int32_t>(*g)});
    } else if (q.transform.group_field) {
      return std::nullopt;
    }
    if (q.encoding.color_field) return std::nullopt;
    // Extension layers: pick the node whose spelling reproduces the clause.
    for (Layer l : layers_) {
      if (static_cast<int>(l) <= static_cast<int>(Layer::kGroupField)) continue;
      bool found = false;
      for (NodeId id : nodes_in(l)) {
        PartialQuery trial = out.with(nodes_[id.value].action);
        VisQuery v = spell(trial, table);
        bool same = l == Layer::kBin      ? v.transform.bin == q.transform.bin
                    : l == Layer::kSort   ? v.transform.sort == q.transform.sort
                    : l == Layer::kTopK   ? v.transform.topk == q.transform.topk
                                          : v.transform.filter == q.transform.filter;
        if (same) {
          out = trial;
          found = true;
          break;
        }
      }
      if (!found) return std::nullopt;
    }
    if (spell(out, table) != q) return std::nullopt;
    return out;
  }

  nlohmann::json dump() const {
    using nlohmann::json;
    json nodes = json::array();
    for (const GraphNode& n : nodes_) {
      nodes.push_back({{"id", n.id.value},
                       {"layer", std::string(to_string(n.layer))},
                       {"operation", n.label},
                       {"visits", n.visit_count},
                       {"mean_reward", n.mean()},
                       {"frozen", is_frozen(n.id)}});
    }
    std::vector<std::pair<std::uint64_t, EdgeStats>> sorted(edges_.begin(), edges_.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    json edges = json::array();
    for (const auto& [key, s] : sorted) {
      edges.push_back({{"from", static_cast<std::uint32_t>(key >> 32)},
                       {"to", static_cast<std::uint32_t>(key & 0xffffffffu)},
                       {"n", s.visit_count},
                       {"mean_reward", s.mean()}});
    }
    json layers = json::array();
    for (Layer l : layers_) layers.push_back(std::string(to_string(l)));
    return {{"layers", layers}, {"nodes", nodes}, {"edges", edges}};
  }

 private:
  friend QueryGraph build_graph(const Table& table, const GraphConfig& config);

  static std::uint64_t edge_key(NodeId from, NodeId to) {
    return (static_cast<std::uint64_t>(from.value) << 32) | to.value;
  }

  std::size_t layer_index(Layer l) const {
    if (l == Layer::kRoot) return 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i] == l) return i + 1;
    }
    return 0;
  }

  void validate_path(std::span<const EdgeRef> path) const {
    NodeId at = root();
    for (std::size_t i = 0; i < path.size(); ++i) {
      const EdgeRef& e = path[i];
      auto broken = [&](const std::string& why) {
        throw BackpropError(BackpropError::Kind::BrokenPath,
                            "edge " + std::to_string(i) + ": " + why);
      };
      if (e.from.value >= nodes_.size() || e.to.value >= nodes_.size()) broken("unknown node");
      if (e.from != at) broken("not adjacent to the previous edge");
      const GraphNode& from = nodes_[e.from.value];
      const GraphNode& to = nodes_[e.to.value];
      std::size_t fi = layer_index(from.layer);
      std::size_t ti = layer_index(to.layer);
      if (ti <= fi) broken("does not advance to a later layer");
      for (std::size_t skipped = fi + 1; skipped < ti; ++skipped) {
        bool none_skip = layers_[skipped - 1] == Layer::kGroupField &&
                         from.layer == Layer::kAggregate &&
                         static_cast<Aggregate>(from.action.value) == Aggregate::kNone;
        if (!none_skip) broken("skips layer " + std::string(to_string(layers_[skipped - 1])));
      }
      at = e.to;
    }
  }

  NodeId add_node(Layer layer, std::int32_t value, std::string label) {
    NodeId id{static_cast<std::uint32_t>(nodes_.size())};
    Action a{layer, value};
    nodes_.push_back(GraphNode{id, layer, a, std::move(label), 0, 0.0});
    by_action_.emplace(a, id);
    layer_nodes_[layer].push_back(id);
    return id;
  }

  std::vector<Layer> layers_;
  std::vector<GraphNode> nodes_;
  std::map<Action, NodeId> by_action_;
  std::map<Layer, std::vector<NodeId>> layer_nodes_;
  std::unordered_map<std::uint64_t, EdgeStats> edges_;
  std::set<std::uint32_t> frozen_;
  std::vector<Filter> filter_options_;
  std::vector<double> bucket_widths_;
  std::size_t column_count_ = 0;
  GraphConfig config_;
};

namespace detail {

// Rounds range/10 to 1, 2 or 5 times a power of ten.
inline double nice_bucket_width(const Column& c) {
  if (c.semantic_type != SemanticType::kNumeric || !c.stats.min || !c.stats.max) return 1.0;
  double range = std::get<double>(*c.stats.max) - std::get<double>(*c.stats.min);
  if (!(range > 0.0)) return 1.0;
  double raw = range / 10.0;
  double base = std::pow(10.0, std::floor(std::log10(raw)));
  for (double step : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= step * base) return step * base;
  }
  return 10.0 * base;
}

}  // namespace detail

// Materializes every node eagerly; edges appear on first traversal.
inline QueryGraph build_graph(const Table& table, const GraphConfig& config = {}) {
  const std::size_t m = table.column_count();
  if (m == 0) throw GraphError(GraphError::Kind::NoColumns, "table has no columns");
  QueryGraph g;
  g.config_ = config;
  g.column_count_ = m;
  g.layers_ = {Layer::kMark, Layer::kXField, Layer::kYField, Layer::kAggregate,
               Layer::kGroupField};
  if (config.bin) g.layers_.push_back(Layer::kBin);
  if (config.sort) g.layers_.push_back(Layer::kSort);
  if (config.topk) g.layers_.push_back(Layer::kTopK);
  if (config.filter) g.layers_.push_back(Layer::kFilter);

  g.nodes_.push_back(GraphNode{NodeId{0}, Layer::kRoot, Action{}, "root", 0, 0.0});
  for (Mark mk : kAllMarks) {
    g.add_node(Layer::kMark, static_cast<std::int32_t>(mk), std::string(to_string(mk)));
  }
  for (Layer l : {Layer::kXField, Layer::kYField}) {
    for (std::size_t c = 0; c < m; ++c) {
      g.add_node(l, static_cast<std::int32_t>(c), table.column(c).name);
    }
  }
  for (Aggregate a : kAllAggregates) {
    g.add_node(Layer::kAggregate, static_cast<std::int32_t>(a), std::string(to_string(a)));
  }
  for (std::size_t c = 0; c < m; ++c) {
    g.add_node(Layer::kGroupField, static_cast<std::int32_t>(c), table.column(c).name);
  }
  for (std::size_t c = 0; c < m; ++c) {
    g.bucket_widths_.push_back(detail::nice_bucket_width(table.column(c)));
  }
  if (config.bin) {
    g.add_node(Layer::kBin, 0, "skip");
    g.add_node(Layer::kBin, 1, "year");
    g.add_node(Layer::kBin, 2, "month");
    g.add_node(Layer::kBin, 3, "weekday");
    g.add_node(Layer::kBin, 4, "bucket");
  }
  if (config.sort) {
    g.add_node(Layer::kSort, 0, "skip");
    g.add_node(Layer::kSort, 1, "x asc");
    g.add_node(Layer::kSort, 2, "x desc");
    g.add_node(Layer::kSort, 3, "y asc");
    g.add_node(Layer::kSort, 4, "y desc");
  }
  if (config.topk) {
    g.add_node(Layer::kTopK, 0, "skip");
    for (std::size_t i = 0; i < config.topk_values.size(); ++i) {
      g.add_node(Layer::kTopK, static_cast<std::int32_t>(i + 1),
                 std::to_string(config.topk_values[i]));
    }
  }
  if (config.filter) {
    g.add_node(Layer::kFilter, 0, "skip");
    for (std::size_t c = 0; c < m; ++c) {
      const Column& col = table.column(c);
      if (col.semantic_type != SemanticType::kCategorical ||
          col.stats.distinct_count > config.filter_max_distinct) {
        continue;
      }
      std::vector<Cell> values;
      std::unordered_set<Cell, CellHash> seen;
      for (std::size_t r = 0; r < table.row_count(); ++r) {
        const Cell& v = table.cell(r, c);
        if (!is_null(v) && seen.insert(v).second) values.push_back(v);
      }
      for (const Cell& v : values) {
        g.filter_options_.push_back(Filter{col.name, CompareOp::kEq, v});
        g.add_node(Layer::kFilter, static_cast<std::int32_t>(g.filter_options_.size()),
                   col.name + " = " + cell_to_string(v));
      }
    }
  }
  return g;
}

}  // namespace vizrec
