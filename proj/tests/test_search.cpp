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

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vizrec/search.hpp"

namespace vizrec {
namespace {

using testing_util::flights;

SearchResult search(const Table& t, const SearchConfig& c, QueryGraph* graph = nullptr) {
  QueryGraph local = build_graph(t);
  QueryGraph& g = graph ? *graph : local;
  return run_search(t, g, RuleSet(), RewardModels(), c);
}

std::set<std::string> canonical_set(const std::vector<RankedEntry>& entries) {
  std::set<std::string> out;
  for (const RankedEntry& e : entries) out.insert(e.canonical);
  return out;
}

TEST(Ucb, Examples) {
  EXPECT_NEAR(ucb_value(0.5, 2, 8, 1.5), 0.5 + 1.5 * std::sqrt(2.0 * std::log(8.0) / 2.0), 1e-15);
  EXPECT_NEAR(ucb_value(0.5, 2, 8, 1.5), 2.6630, 5e-5);
  EXPECT_EQ(ucb_value(0.3, 0, 8, 1.5), std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(ucb_value(0.7, 1, 1, 0.0), 0.7);
  EXPECT_DOUBLE_EQ(ucb_value(0.7, 1, 1, 2.0), 0.7);  // ln 1 = 0
}

TEST(ExplorationProbability, ExamplesAndDecay) {
  EXPECT_DOUBLE_EQ(exploration_probability(0, 0.9, 0.5), 0.9);
  EXPECT_NEAR(exploration_probability(3, 0.9, 0.5), 0.1125, 1e-15);
  for (std::size_t n = 0; n < 40; ++n) {
    EXPECT_LT(exploration_probability(n + 1, 0.9, 0.5), exploration_probability(n, 0.9, 0.5));
  }
  EXPECT_EQ(exploration_probability(0, 0.0, 0.5), 0.0);
}

TEST(SearchConfig, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = [](auto mutate) {
    SearchConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), RangeError);
  };
  bad([](SearchConfig& c) { c.iterations = -1; });
  bad([](SearchConfig& c) { c.ucb_c = -0.1; });
  bad([](SearchConfig& c) { c.explore_p0 = 1.1; });
  bad([](SearchConfig& c) { c.explore_alpha = 1.0; });
  bad([](SearchConfig& c) { c.explore_alpha = 0.0; });
  bad([](SearchConfig& c) { c.top_k = 0; });
  bad([](SearchConfig& c) { c.beta = 2.0; });
}

TEST(SelectAction, UnvisitedTieGoesToLowestNode) {
  QueryGraph g = build_graph(flights());
  SearchConfig c;
  c.explore_p0 = 0.0;
  std::mt19937_64 rng(1);
  ActionChoice a = select_action(g, g.empty_query(), flights(), rng, c);
  EXPECT_FALSE(a.random);
  EXPECT_EQ(a.action, (Action{Layer::kMark, 0}));
  EXPECT_EQ(a.node.value, 1u);
}

TEST(SelectAction, FrozenAndIllegalNodesAreSkipped) {
  QueryGraph g = build_graph(flights());
  g.freeze_except(Layer::kMark, {Action{Layer::kMark, static_cast<int>(Mark::kScatter)}});
  SearchConfig c;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(select_action(g, g.empty_query(), flights(), rng, c).action.value,
              static_cast<int>(Mark::kScatter));
  }
  // Scatter needs numeric x: only Delay survives.
  PartialQuery s = g.empty_query().with({Layer::kMark, static_cast<int>(Mark::kScatter)});
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(select_action(g, s, flights(), rng, c).action, (Action{Layer::kXField, 1}));
  }
  Table cat = parse_table("k\na\nb\n");
  QueryGraph h = build_graph(cat);
  h.freeze_except(Layer::kMark, {Action{Layer::kMark, static_cast<int>(Mark::kScatter)}});
  PartialQuery dead = h.empty_query().with({Layer::kMark, static_cast<int>(Mark::kScatter)});
  try {
    select_action(h, dead, cat, rng, c);
    FAIL();
  } catch (const SearchError& e) {
    EXPECT_EQ(e.kind(), SearchError::Kind::DeadEnd);
  }
}

TEST(SelectAction, DeterministicForSeedAndState) {
  QueryGraph g = build_graph(flights());
  SearchConfig c;
  c.iterations = 30;
  search(flights(), c, &g);
  PartialQuery s = g.empty_query().with({Layer::kMark, 0});
  std::mt19937_64 first(77);
  ActionChoice want = select_action(g, s, flights(), first, c);
  for (int i = 0; i < 100; ++i) {
    std::mt19937_64 rng(77);
    ActionChoice got = select_action(g, s, flights(), rng, c);
    EXPECT_EQ(got.action, want.action);
    EXPECT_EQ(got.random, want.random);
  }
}

TEST(SelectAction, ZeroP0IsPureUcb) {
  QueryGraph g = build_graph(flights());
  SearchConfig c;
  c.iterations = 60;
  search(flights(), c, &g);
  c.explore_p0 = 0.0;
  // Oracle: recompute the UCB argmax by hand over legal marks.
  NodeId root = QueryGraph::root();
  double best = -1;
  NodeId want;
  for (const Successor& s : g.successors(root, g.empty_query())) {
    double v = ucb_value(s.stats.mean(), s.stats.visit_count, g.node(root).visit_count, c.ucb_c);
    if (v > best) {
      best = v;
      want = s.node;
    }
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    ActionChoice a = select_action(g, g.empty_query(), flights(), rng, c);
    EXPECT_FALSE(a.random);
    EXPECT_EQ(a.node, want);
  }
}

TEST(SearchProperty, ExplorationDecayFrequency) {
  QueryGraph g = build_graph(flights());
  SearchConfig c;
  std::vector<Action> path = {{Layer::kMark, 0},
                              {Layer::kXField, 0},
                              {Layer::kYField, 1},
                              {Layer::kAggregate, static_cast<int>(Aggregate::kAvg)}};
  std::mt19937_64 rng(2024);
  PartialQuery s = g.empty_query();
  for (std::size_t d = 0; d <= path.size(); ++d) {
    int random = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) random += select_action(g, s, flights(), rng, c).random;
    EXPECT_NEAR(random / static_cast<double>(n), exploration_probability(d, 0.9, 0.5), 0.03) << d;
    if (d < path.size()) s.push(path[d]);
  }
}

TEST(RunSearch, FlightsTopFive) {
  SearchConfig c;
  c.top_k = 5;
  SearchResult r = search(flights(), c);
  ASSERT_EQ(r.ranked.size(), 5u);
  EXPECT_EQ(canonical_set(r.ranked).size(), 5u);
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    EXPECT_EQ(r.ranked[i].reward.s_k, 1);
    if (i) {
      EXPECT_LE(r.ranked[i].reward.crf, r.ranked[i - 1].reward.crf);
    }
  }
  EXPECT_EQ(r.stats.iterations_run, 100);
  EXPECT_EQ(r.stats.simulations + r.stats.dead_ends, 100);
  EXPECT_LE(static_cast<std::size_t>(r.stats.distinct_queries_seen), 100u);
}

TEST(RunSearch, ZeroIterations) {
  SearchConfig c;
  c.iterations = 0;
  SearchResult r = search(flights(), c);
  EXPECT_TRUE(r.ranked.empty());
  EXPECT_EQ(r.stats.iterations_run, 0);
}

TEST(RunSearch, NoValidQuery) {
  Table cat = parse_table("k\na\nb\n");
  SearchConfig c;
  c.iterations = 20;
  try {
    search(cat, c);
    FAIL();
  } catch (const SearchError& e) {
    EXPECT_EQ(e.kind(), SearchError::Kind::NoValidQuery);
  }
}

TEST(RunSearch, RankedEntriesAreLegalAndRecomputable) {
  RuleSet rules;
  RewardModels models;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SearchConfig c;
    c.seed = seed;
    c.iterations = 150;
    Table t = testing_util::synthetic(5, 40, seed);
    SearchResult r = search(t, c);
    ASSERT_FALSE(r.ranked.empty());
    for (const RankedEntry& e : r.ranked) {
      EXPECT_EQ(e.reward.s_k, 1);
      EXPECT_TRUE(e.reward.violated_rules.empty());
      EXPECT_EQ(e.canonical, to_canonical_text(e.query));
      EXPECT_DOUBLE_EQ(e.reward.crf,
                       composite_reward(e.reward.s_k, e.reward.s_d, e.reward.s_u, e.reward.beta).crf);
      Evaluation again = evaluate(e.query, t, rules, models);
      EXPECT_EQ(again.reward, e.reward);
    }
    // The pool holds the ranked prefix and nothing twice.
    EXPECT_EQ(canonical_set(r.pool).size(), r.pool.size());
    for (std::size_t i = 0; i < r.ranked.size(); ++i) EXPECT_EQ(r.pool[i].canonical, r.ranked[i].canonical);
  }
}

TEST(RunSearch, DeterministicForSeed) {
  SearchConfig c;
  c.seed = 9;
  QueryGraph a = build_graph(flights()), b = build_graph(flights());
  SearchResult ra = search(flights(), c, &a);
  SearchResult rb = search(flights(), c, &b);
  ASSERT_EQ(ra.pool.size(), rb.pool.size());
  for (std::size_t i = 0; i < ra.pool.size(); ++i) {
    EXPECT_EQ(ra.pool[i].canonical, rb.pool[i].canonical);
    EXPECT_EQ(ra.pool[i].reward, rb.pool[i].reward);
  }
  EXPECT_EQ(a.dump(), b.dump());
  c.seed = 10;
  QueryGraph d = build_graph(flights());
  search(flights(), c, &d);
  EXPECT_NE(a.dump(), d.dump());
}

TEST(RunSearch, FindsExhaustiveOptimumOnSmallSpace) {
  const Table& t = testing_util::sales();
  QueryGraph g = build_graph(t);
  double best = testing_util::exhaustive_best_crf(g, t, RuleSet(), RewardModels());
  ASSERT_GT(best, 0.0);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SearchConfig c;
    c.seed = seed;
    c.iterations = 200;
    SearchResult r = search(t, c);
    hits += std::abs(r.ranked.front().reward.crf - best) < 1e-12;
  }
  EXPECT_GE(hits, 19);
}

TEST(TreeBaseline, MaterializesMoreNodesThanGraph) {
  for (std::size_t m : {1u, 3u, 5u}) {
    Table t = m == 1 ? testing_util::amounts() : testing_util::synthetic(m, 30);
    SearchConfig c;
    TreeSearchResult tree = run_tree_baseline(t, RuleSet(), RewardModels(), c);
    EXPECT_GT(tree.materialized_nodes, 3 * m + 8) << m;
    EXPECT_LE(tree.materialized_nodes, 16 * m * m * m) << m;
  }
  SearchConfig c;
  TreeSearchResult tree = run_tree_baseline(flights(), RuleSet(), RewardModels(), c);
  SearchResult graph = search(flights(), c);
  EXPECT_NEAR(tree.result.ranked.front().reward.crf, graph.ranked.front().reward.crf, 0.05);
}

TEST(TreeBaseline, ExhaustiveBudgetFindsSameQuerySet) {
  const Table& t = testing_util::sales();
  SearchConfig c;
  c.iterations = 3000;
  SearchResult graph = search(t, c);
  TreeSearchResult tree = run_tree_baseline(t, RuleSet(), RewardModels(), c);
  // Oracle: every valid query in the space.
  QueryGraph g = build_graph(t);
  std::set<std::string> valid;
  for (const PartialQuery& q : testing_util::enumerate_paths(g)) {
    Evaluation e = evaluate(g.spell(q, t), t, RuleSet(), RewardModels());
    if (e.reward.s_k == 1) valid.insert(e.canonical);
  }
  EXPECT_EQ(canonical_set(graph.pool), valid);
  EXPECT_EQ(canonical_set(tree.result.pool), valid);
}

TEST(SearchProperty, HighArmAttractsVisits) {
  // Stubbed Bernoulli reward: mean 0.9 under bar, 0.1 otherwise.
  const Table& t = flights();
  QueryGraph g = build_graph(t);
  QueryEvaluator real(g, t, RuleSet(), RewardModels());
  std::mt19937_64 coin(5);
  Evaluator stub = [&](const PartialQuery& q) {
    Outcome o = real(q);
    double mean = q.get(Layer::kMark)->value == static_cast<int>(Mark::kBar) ? 0.9 : 0.1;
    o.reward = std::bernoulli_distribution(mean)(coin) ? 1.0 : 0.0;
    return o;
  };
  SearchConfig c;
  c.iterations = 500;
  c.explore_p0 = 0.1;
  run_search_with(t, g, RuleSet(), stub, c);
  NodeId bar = g.node_for({Layer::kMark, static_cast<int>(Mark::kBar)});
  double share = static_cast<double>(g.edge(QueryGraph::root(), bar).visit_count) / 500.0;
  EXPECT_GT(share, 0.6);
}

TEST(SearchProperty, LatencyOnWideTable) {
  Table t = testing_util::synthetic(15, 5000);
  SearchConfig c;
  SearchResult r = search(t, c);
  EXPECT_FALSE(r.ranked.empty());
  EXPECT_LT(r.stats.wall_time_s, 2.0);
}

}  // namespace
}  // namespace vizrec
