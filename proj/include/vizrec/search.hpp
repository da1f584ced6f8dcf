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

// Monte Carlo graph search over the query graph.
//
// Each iteration descends from the root. At a node whose legal out-edges have
// all been tried, the next clause comes from select_action(): with
// probability p0 * alpha^depth a uniformly random legal action, otherwise the
// UCB argmax. At the first node with an untried legal edge, one such edge is
// expanded and the rest of the query is completed by uniform random legal
// choices. The complete query is executed and scored, and the reward is
// backpropagated along every edge of the query's path. Iterations that run
// out of legal actions back up a reward of 0.
//
// run_tree_baseline() runs the same loop over a tree without node sharing,
// for node-count comparisons.

#pragma once

#include <algorithm>
#include <memory>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "vizrec/chart.hpp"
#include "vizrec/error.hpp"
#include "vizrec/graph.hpp"
#include "vizrec/query.hpp"
#include "vizrec/reward.hpp"
#include "vizrec/rules.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

struct SearchConfig {
  std::int64_t iterations = 100;
  double ucb_c = 1.5;
  double explore_p0 = 0.9;
  double explore_alpha = 0.5;
  std::size_t top_k = 10;
  std::uint64_t seed = 42;
  double beta = kDefaultBeta;

  void validate() const {
    if (iterations < 0) throw RangeError(RangeError::Kind::OutOfRange, "iterations must be >= 0");
    if (!(ucb_c >= 0.0)) throw RangeError(RangeError::Kind::OutOfRange, "c must be >= 0");
    if (!(explore_p0 >= 0.0 && explore_p0 <= 1.0)) {
      throw RangeError(RangeError::Kind::OutOfRange, "p0 must lie in [0,1]");
    }
    if (!(explore_alpha > 0.0 && explore_alpha < 1.0)) {
      throw RangeError(RangeError::Kind::OutOfRange, "alpha must lie in (0,1)");
    }
    if (top_k < 1) throw RangeError(RangeError::Kind::OutOfRange, "top_k must be >= 1");
    if (!(beta >= 0.0 && beta <= 1.0)) {
      throw RangeError(RangeError::Kind::OutOfRange, "beta must lie in [0,1]");
    }
  }
};

struct SearchStats {
  std::int64_t iterations_run = 0;
  std::int64_t simulations = 0;
  std::int64_t dead_ends = 0;
  std::int64_t distinct_queries_seen = 0;
  double wall_time_s = 0.0;
};

struct RankedEntry {
  VisQuery query;
  std::string canonical;
  RewardBreakdown reward;
  std::shared_ptr<const ChartData> data;  // shared with the evaluation cache
};

struct SearchResult {
  // Best top_k by crf (ties by canonical text).
  std::vector<RankedEntry> ranked;
  // Every distinct valid query seen, in the same order. Hint generation
  // draws from this.
  std::vector<RankedEntry> pool;
  SearchStats stats;
};

// What the engine needs from a query evaluation. `evaluation` may be null for
// stubbed rewards; such queries never enter the result lists.
struct Outcome {
  double reward = 0.0;
  const Evaluation* evaluation = nullptr;
};

using Evaluator = std::function<Outcome(const PartialQuery&)>;

inline double ucb_value(double mean, std::uint64_t child_visits, std::uint64_t parent_visits,
                        double c) {
  if (child_visits == 0) return std::numeric_limits<double>::infinity();
  double n = static_cast<double>(std::max<std::uint64_t>(parent_visits, 1));
  return mean + c * std::sqrt(2.0 * std::log(n) / static_cast<double>(child_visits));
}

inline double exploration_probability(std::size_t clauses_chosen, double p0, double alpha) {
  double p = p0 * std::pow(alpha, static_cast<double>(clauses_chosen));
  return std::min(1.0, std::max(0.0, p));
}

struct Arm {
  Action action;
  std::uint32_t key = 0;  // graph node id; argmax ties go to the lowest
  EdgeStats stats;
};

struct Choice {
  std::size_t index = 0;
  bool random = false;
};

namespace detail {

inline Choice choose_arm(const std::vector<Arm>& arms, std::uint64_t parent_visits,
                         std::size_t depth, std::mt19937_64& rng, const SearchConfig& config) {
  double p = exploration_probability(depth, config.explore_p0, config.explore_alpha);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < p) {
    std::uniform_int_distribution<std::size_t> pick(0, arms.size() - 1);
    return {pick(rng), true};
  }
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < arms.size(); ++i) {
    double v = ucb_value(arms[i].stats.mean(), arms[i].stats.visit_count, parent_visits,
                         config.ucb_c);
    if (v > best_value || (v == best_value && arms[i].key < arms[best].key)) {
      best = i;
      best_value = v;
    }
  }
  return {best, false};
}

inline std::vector<Arm> legal_arms(const std::vector<Arm>& arms, const PartialQuery& state,
                                   const Table& table, const RuleSet& rules) {
  std::vector<Action> actions;
  actions.reserve(arms.size());
  for (const Arm& a : arms) actions.push_back(a.action);
  std::vector<Action> legal = legal_actions(state, actions, table, rules);
  std::vector<Arm> out;
  out.reserve(legal.size());
  std::size_t j = 0;
  for (const Arm& a : arms) {
    if (j < legal.size() && legal[j] == a.action) {
      out.push_back(a);
      ++j;
    }
  }
  return out;
}

inline std::vector<Arm> graph_arms(const QueryGraph& graph, NodeId from,
                                   const PartialQuery& state) {
  std::vector<Arm> arms;
  for (const Successor& s : graph.successors(from, state)) {
    arms.push_back(Arm{s.action, s.node.value, s.stats});
  }
  return arms;
}

// Shared-node store: the query graph itself.
class GraphStore {
 public:
  using Handle = NodeId;
  static constexpr bool kTracksSimulation = true;

  explicit GraphStore(QueryGraph& graph) : graph_(graph) {}

  Handle root() const { return QueryGraph::root(); }
  std::uint64_t visits(Handle h) const { return graph_.node(h).visit_count; }
  std::vector<Arm> arms(Handle h, const PartialQuery& state) {
    return graph_arms(graph_, h, state);
  }
  Handle child(Handle, Action a) const { return graph_.node_for(a); }
  void backpropagate(const std::vector<Handle>& path, double reward) {
    std::vector<EdgeRef> edges;
    edges.reserve(path.size());
    for (std::size_t i = 1; i < path.size(); ++i) edges.push_back(EdgeRef{path[i - 1], path[i]});
    graph_.backpropagate(edges, reward);
  }

 private:
  QueryGraph& graph_;
};

// Tree store: one node per path prefix. A node's children are materialized
// together the first time the node is descended from.
class TreeStore {
 public:
  using Handle = std::uint32_t;
  static constexpr bool kTracksSimulation = false;

  explicit TreeStore(const QueryGraph& space) : space_(space) { nodes_.push_back(Node{}); }

  Handle root() const { return 0; }
  std::uint64_t visits(Handle h) const { return nodes_[h].stats.visit_count; }
  std::size_t materialized() const { return nodes_.size() - 1; }

  std::vector<Arm> arms(Handle h, const PartialQuery& state) {
    if (!nodes_[h].materialized) {
      nodes_[h].materialized = true;
      for (const Successor& s : space_.successors(space_.position(state), state)) {
        Node n;
        n.action = s.action;
        n.key = s.node.value;
        nodes_.push_back(n);
        nodes_[h].children.push_back(static_cast<Handle>(nodes_.size() - 1));
      }
    }
    std::vector<Arm> out;
    for (Handle c : nodes_[h].children) {
      out.push_back(Arm{nodes_[c].action, nodes_[c].key, nodes_[c].stats});
    }
    return out;
  }

  Handle child(Handle h, Action a) const {
    for (Handle c : nodes_[h].children) {
      if (nodes_[c].action == a) return c;
    }
    throw GraphError(GraphError::Kind::UnknownNode, "tree child not materialized");
  }

  void backpropagate(const std::vector<Handle>& path, double reward) {
    for (Handle h : path) {
      nodes_[h].stats.visit_count += 1;
      nodes_[h].stats.reward_sum += reward;
    }
  }

 private:
  struct Node {
    Action action;
    std::uint32_t key = 0;
    bool materialized = false;
    std::vector<Handle> children;
    EdgeStats stats;
  };
  const QueryGraph& space_;
  std::vector<Node> nodes_;
};

template <class Store>
SearchResult run_engine(Store& store, const QueryGraph& space, const Table& table,
                        const RuleSet& rules, const Evaluator& evaluator,
                        const SearchConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SearchResult result;
  std::mt19937_64 rng(config.seed);
  std::map<std::string, RankedEntry> pool;
  std::set<std::vector<Action>> seen;

  for (std::int64_t it = 0; it < config.iterations; ++it) {
    ++result.stats.iterations_run;
    PartialQuery state = space.empty_query();
    typename Store::Handle h = store.root();
    std::vector<typename Store::Handle> path{h};
    bool tree_policy = true;
    bool dead_end = false;
    while (!state.complete()) {
      std::vector<Arm> arms = tree_policy || Store::kTracksSimulation
                                  ? store.arms(h, state)
                                  : graph_arms(space, space.position(state), state);
      std::vector<Arm> legal = legal_arms(arms, state, table, rules);
      if (legal.empty()) {
        dead_end = true;
        break;
      }
      std::size_t pick = 0;
      if (tree_policy) {
        std::vector<std::size_t> untried;
        for (std::size_t i = 0; i < legal.size(); ++i) {
          if (legal[i].stats.visit_count == 0) untried.push_back(i);
        }
        if (!untried.empty()) {
          std::uniform_int_distribution<std::size_t> u(0, untried.size() - 1);
          pick = untried[u(rng)];
          tree_policy = false;  // expansion; simulate from here
        } else {
          pick = choose_arm(legal, store.visits(h), state.depth(), rng, config).index;
        }
        h = store.child(h, legal[pick].action);
        path.push_back(h);
      } else {
        std::uniform_int_distribution<std::size_t> u(0, legal.size() - 1);
        pick = u(rng);
        if constexpr (Store::kTracksSimulation) {
          h = store.child(h, legal[pick].action);
          path.push_back(h);
        }
      }
      state.push(legal[pick].action);
    }
    if (dead_end) {
      ++result.stats.dead_ends;
      store.backpropagate(path, 0.0);
      continue;
    }
    ++result.stats.simulations;
    seen.insert(state.clauses());
    Outcome out = evaluator(state);
    store.backpropagate(path, out.reward);
    const Evaluation* ev = out.evaluation;
    if (ev && ev->reward.s_k == 1 && ev->data && !pool.count(ev->canonical)) {
      pool.emplace(ev->canonical, RankedEntry{ev->query, ev->canonical, ev->reward, ev->data});
    }
  }

  result.stats.distinct_queries_seen = static_cast<std::int64_t>(seen.size());
  for (auto& [text, entry] : pool) result.pool.push_back(std::move(entry));
  std::stable_sort(result.pool.begin(), result.pool.end(),
                   [](const RankedEntry& a, const RankedEntry& b) {
                     return a.reward.crf > b.reward.crf;
                   });
  std::size_t k = std::min(config.top_k, result.pool.size());
  result.ranked.assign(result.pool.begin(), result.pool.begin() + static_cast<std::ptrdiff_t>(k));
  result.stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (config.iterations > 0 && result.pool.empty()) {
    throw SearchError(SearchError::Kind::NoValidQuery,
                      "no valid query found in " + std::to_string(config.iterations) +
                          " iterations");
  }
  return result;
}

}  // namespace detail

// Memoizing evaluator: spells the query through the graph, executes it and
// scores it. Evaluations live as long as the returned object.
class QueryEvaluator {
 public:
  QueryEvaluator(const QueryGraph& graph, const Table& table, const RuleSet& rules,
                 RewardModels models)
      : graph_(graph), table_(table), rules_(rules), models_(std::move(models)) {}

  Outcome operator()(const PartialQuery& q) {
    auto it = cache_.find(q.clauses());
    if (it == cache_.end()) {
      VisQuery vq = graph_.spell(q, table_);
      it = cache_.emplace(q.clauses(), evaluate(vq, table_, rules_, models_)).first;
    }
    return Outcome{it->second.reward.crf, &it->second};
  }

 private:
  const QueryGraph& graph_;
  const Table& table_;
  const RuleSet& rules_;
  RewardModels models_;
  std::map<std::vector<Action>, Evaluation> cache_;
};

// Uses the graph's current statistics and frozen set; updates statistics.
inline SearchResult run_search_with(const Table& table, QueryGraph& graph, const RuleSet& rules,
                                    const Evaluator& evaluator, const SearchConfig& config) {
  detail::GraphStore store(graph);
  return detail::run_engine(store, graph, table, rules, evaluator, config);
}

inline SearchResult run_search(const Table& table, QueryGraph& graph, const RuleSet& rules,
                               RewardModels models, const SearchConfig& config) {
  models.beta = config.beta;
  auto eval = std::make_shared<QueryEvaluator>(graph, table, rules, std::move(models));
  return run_search_with(table, graph, rules, [eval](const PartialQuery& q) { return (*eval)(q); },
                         config);
}

struct TreeSearchResult {
  SearchResult result;
  std::size_t materialized_nodes = 0;
};

inline TreeSearchResult run_tree_baseline_with(const Table& table, const RuleSet& rules,
                                               const Evaluator& evaluator,
                                               const SearchConfig& config,
                                               const GraphConfig& graph_config = {}) {
  QueryGraph space = build_graph(table, graph_config);
  detail::TreeStore store(space);
  TreeSearchResult out;
  out.result = detail::run_engine(store, space, table, rules, evaluator, config);
  out.materialized_nodes = store.materialized();
  return out;
}

inline TreeSearchResult run_tree_baseline(const Table& table, const RuleSet& rules,
                                          RewardModels models, const SearchConfig& config,
                                          const GraphConfig& graph_config = {}) {
  models.beta = config.beta;
  QueryGraph space = build_graph(table, graph_config);
  QueryEvaluator eval(space, table, rules, std::move(models));
  detail::TreeStore store(space);
  TreeSearchResult out;
  out.result = detail::run_engine(store, space, table, rules,
                                  [&eval](const PartialQuery& q) { return eval(q); }, config);
  out.materialized_nodes = store.materialized();
  return out;
}

// select_action for the graph: the choice made at `state` when all of its
// legal edges have been tried. Throws SearchError::DeadEnd when no legal
// action remains.
struct ActionChoice {
  Action action;
  NodeId node;
  bool random = false;
};

inline ActionChoice select_action(const QueryGraph& graph, const PartialQuery& state,
                                  const Table& table, std::mt19937_64& rng,
                                  const SearchConfig& config, const RuleSet& rules = RuleSet()) {
  NodeId from = graph.position(state);
  std::vector<Arm> legal =
      detail::legal_arms(detail::graph_arms(graph, from, state), state, table, rules);
  if (legal.empty()) throw SearchError(SearchError::Kind::DeadEnd, "no legal action");
  Choice c = detail::choose_arm(legal, graph.node(from).visit_count, state.depth(), rng, config);
  return {legal[c.index].action, NodeId{legal[c.index].key}, c.random};
}

}  // namespace vizrec
