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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Oracles here are written out longhand rather than
// borrowed from the library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "vizrec/vizrec.hpp"

namespace {

using namespace vizrec;
namespace tu = vizrec::testing_util;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int n, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  double s = seconds_since(t0);
  if (limit_s > 0 && s >= limit_s) {
    o.pass = false;
    o.detail += "; over time limit " + fmt("%.0f", limit_s) + " s";
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << n << "  " << name << "  ["
            << o.detail << "; " << fmt("%.2f", s) << " s]" << std::endl;
}

Table table_with_columns(std::size_t m) {
  return m == 1 ? tu::amounts() : tu::synthetic(m, 30, m);
}

Outcome node_accounting() {
  Outcome o;
  std::ostringstream d;
  for (std::size_t m : {1u, 3u, 5u, 10u, 15u}) {
    Table t = table_with_columns(m);
    std::size_t graph = build_graph(t).node_count();
    SearchConfig c;
    std::size_t tree = run_tree_baseline(t, RuleSet(), RewardModels(), c).materialized_nodes;
    bool ok = graph == 3 * m + 8 && tree > graph && tree <= 16 * m * m * m;
    o.pass &= ok;
    d << "m=" << m << " graph " << graph << " tree " << tree << (ok ? "" : " (bad)") << "; ";
  }
  // 16m^3 / (3m+8) at m = 3.
  double ratio = 16.0 * 27.0 / 17.0;
  o.pass &= std::round(ratio * 10.0) / 10.0 == 25.4;
  d << "ratio(m=3) " << fmt("%.2f", ratio);
  o.detail = d.str();
  return o;
}

// Every complete path through the default layers of `g`, evaluated.
double brute_force_best(const Table& t) {
  QueryGraph g = build_graph(t);
  double best = 0.0;
  std::function<void(PartialQuery)> walk = [&](PartialQuery q) {
    if (q.complete()) {
      best = std::max(best, evaluate(g.spell(q, t), t, RuleSet(), RewardModels()).reward.crf);
      return;
    }
    for (const Successor& s : g.successors(g.position(q), q)) walk(q.with(s.action));
  };
  walk(g.empty_query());
  return best;
}

Outcome small_space_optimality() {
  const Table& t = tu::sales();
  if (t.column_count() != 2) return {false, "fixture is not m=2"};
  double best = brute_force_best(t);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SearchConfig c;
    c.seed = seed;
    c.iterations = 200;
    QueryGraph g = build_graph(t);
    SearchResult r = run_search(t, g, RuleSet(), RewardModels(), c);
    if (!r.ranked.empty() && std::abs(r.ranked.front().reward.crf - best) <= 1e-12) ++hits;
  }
  return {hits >= 95, "optimum " + fmt("%.4f", best) + " found in " + std::to_string(hits) + "/100"};
}

// Best total reward over subsets of at most k hints within budget.
double subset_optimum(const std::vector<Hint>& hints, std::size_t k, std::size_t budget) {
  double best = 0.0;
  std::function<void(std::size_t, std::size_t, std::size_t, double)> rec =
      [&](std::size_t i, std::size_t count, std::size_t cost, double f) {
        best = std::max(best, f);
        if (i == hints.size()) return;
        if (count < k && cost + hints[i].cost <= budget) {
          double r = 0.0;
          for (const HintVisualization& v : hints[i].visualizations) r += v.r_v;
          rec(i + 1, count + 1, cost + hints[i].cost, f + r);
        }
        rec(i + 1, count, cost, f);
      };
  rec(0, 0, 0, 0.0);
  return best;
}

Outcome hint_selection() {
  std::mt19937_64 rng(1000);
  double sum = 0.0, worst = 1.0;
  int violations = 0, below_half = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    tu::HintInstance inst = tu::random_hint_instance(rng, 10);
    HintSelection g = select_top_k(inst.hints, inst.k, inst.budget);
    std::size_t cost = 0;
    double f = 0.0;
    for (const Hint& h : g.chosen) {
      cost += h.cost;
      for (const HintVisualization& v : h.visualizations) f += v.r_v;
    }
    if (g.chosen.size() > inst.k || cost > inst.budget) ++violations;
    double opt = subset_optimum(inst.hints, inst.k, inst.budget);
    double ratio = opt > 0.0 ? f / opt : 1.0;
    sum += ratio;
    worst = std::min(worst, ratio);
    below_half += ratio < 0.5;
  }
  double mean = sum / n;
  Outcome o;
  o.pass = violations == 0 && mean >= 0.90 && worst >= 0.50;
  o.detail = "constraint violations " + std::to_string(violations) + "/1000; mean ratio " +
             fmt("%.4f", mean) + " (>= 0.90 " + (mean >= 0.90 ? "ok" : "no") + "); min ratio " +
             fmt("%.4f", worst) + " (>= 0.50 " + (worst >= 0.50 ? "ok" : "no") + ", " +
             std::to_string(below_half) + " instances below 0.50)";
  return o;
}

bool close_rel(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

Outcome formula_arithmetic() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::uint64_t> visits(1, 1000000);
  std::uniform_int_distribution<int> depth(0, 12);
  int bad_ucb = 0, bad_p = 0, bad_crf = 0, nonzero_when_invalid = 0, invalid = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    double mean = u(rng), c = 2.0 * u(rng);
    std::uint64_t child = visits(rng);
    std::uint64_t parent = child + visits(rng);
    double want = mean + c * std::sqrt(2.0 * std::log(static_cast<double>(parent)) /
                                       static_cast<double>(child));
    bad_ucb += !close_rel(ucb_value(mean, child, parent, c), want);

    double p0 = u(rng), alpha = u(rng);
    int d = depth(rng);
    double p = p0;
    for (int k = 0; k < d; ++k) p *= alpha;
    bad_p += !close_rel(exploration_probability(static_cast<std::size_t>(d), p0, alpha), p);

    int s_k = u(rng) < 0.5 ? 0 : 1;
    double s_d = u(rng), s_u = u(rng), beta = u(rng);
    double crf = s_k == 0 ? 0.0 : beta * s_d + (1.0 - beta) * s_u;
    double got = composite_reward(s_k, s_d, s_u, beta).crf;
    bad_crf += !close_rel(got, crf);
    if (s_k == 0) {
      ++invalid;
      nonzero_when_invalid += got != 0.0;
    }
  }
  Outcome o;
  o.pass = bad_ucb == 0 && bad_p == 0 && bad_crf == 0 && nonzero_when_invalid == 0;
  o.detail = "mismatches ucb " + std::to_string(bad_ucb) + ", p " + std::to_string(bad_p) +
             ", crf " + std::to_string(bad_crf) + " of 10000; S_k=0 with crf!=0: " +
             std::to_string(nonzero_when_invalid) + "/" + std::to_string(invalid);
  return o;
}

Outcome rule_soundness() {
  std::vector<Table> tables = {tu::flights(), tu::sales(), tu::amounts(), tu::synthetic(6, 50, 3),
                               tu::synthetic(9, 80, 4)};
  std::mt19937_64 rng(31337);
  int crashes = 0, valid = 0, valid_not_executing = 0;
  for (int i = 0; i < 10000; ++i) {
    const Table& t = tables[static_cast<std::size_t>(i) % tables.size()];
    VisQuery q = tu::random_query(t, rng);
    Evaluation e;
    try {
      e = evaluate(q, t, RuleSet(), RewardModels());
    } catch (...) {
      ++crashes;
      continue;
    }
    if (e.reward.s_k != 1) continue;
    ++valid;
    try {
      execute(q, t);
    } catch (...) {
      ++valid_not_executing;
    }
  }
  int ranked = 0, ranked_invalid = 0;
  for (std::size_t ti = 0; ti < tables.size(); ++ti) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      SearchConfig c;
      c.seed = seed;
      QueryGraph g = build_graph(tables[ti]);
      SearchResult r;
      try {
        r = run_search(tables[ti], g, RuleSet(), RewardModels(), c);
      } catch (const SearchError&) {
        continue;  // no valid query in the space; nothing ranked
      }
      for (const RankedEntry& e : r.ranked) {
        ++ranked;
        ranked_invalid += e.reward.s_k != 1;
      }
    }
  }
  Outcome o;
  o.pass = crashes == 0 && valid_not_executing == 0 && ranked_invalid == 0 && valid > 0;
  o.detail = "crashes " + std::to_string(crashes) + "; S_k=1 " + std::to_string(valid) +
             " of which failed to execute " + std::to_string(valid_not_executing) +
             "; ranked with S_k!=1 " + std::to_string(ranked_invalid) + "/" + std::to_string(ranked);
  return o;
}

Outcome feedback_refinement() {
  int sessions = 0, no_hint = 0, recs = 0, wrong = 0;
  // Seeds whose round one offers no y-field hint are skipped, not counted.
  for (std::uint64_t seed = 1; sessions < 50 && seed <= 200; ++seed) {
    auto t = seed % 2 ? tu::flights_ptr()
                      : std::make_shared<const Table>(tu::synthetic(4 + seed % 5, 60, seed));
    SessionConfig c;
    c.search.seed = seed;
    Session s = Session::start("s" + std::to_string(seed), t, c, {}, {}, tu::counting_clock());
    const Hint* pick = nullptr;
    for (const Hint& h : s.latest().hints_offered) {
      if (h.kind == HintKind::kExploreFieldY) {
        pick = &h;
        break;
      }
    }
    if (!pick) {
      ++no_hint;
      continue;
    }
    const std::string field = pick->target.field;
    s.apply_hint(pick->id);
    ++sessions;
    for (const RankedEntry& e : s.latest().recommendations.ranked) {
      ++recs;
      wrong += e.query.encoding.y_field != field;
    }
  }
  Outcome o;
  o.pass = sessions == 50 && wrong == 0 && recs > 0;
  o.detail = std::to_string(sessions) + "/50 sessions applied a y-field hint (" +
             std::to_string(no_hint) + " seeds offered none); " + std::to_string(recs - wrong) + "/" +
             std::to_string(recs) + " round-2 recommendations bind the hinted y";
  return o;
}

std::vector<std::string> scripted_log(const std::string& csv, std::uint64_t seed) {
  auto t = std::make_shared<const Table>(parse_table(csv));
  SessionConfig c;
  c.search.seed = seed;
  std::vector<std::string> sunk;
  Session s = Session::start("det", t, c, {}, {}, tu::counting_clock(),
                             [&](const std::string& l) { sunk.push_back(l); });
  s.record_kept(1, {s.latest().recommendations.ranked.front().canonical});
  for (int step = 0; step < 2 && !s.latest().hints_offered.empty(); ++step) {
    const auto& offered = s.latest().hints_offered;
    s.apply_hint(step == 0 ? offered.front().id : offered.back().id);
  }
  return sunk;
}

Outcome determinism() {
  int identical = 0, replayed = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    std::string csv = tu::synthetic_csv(3 + trial % 5, 40 + trial, trial);
    auto a = scripted_log(csv, trial);
    auto b = scripted_log(csv, trial);
    identical += a == b && a.size() >= 4;
    Session r = replay_session(std::make_shared<const Table>(parse_table(csv)), a,
                               tu::counting_clock());
    replayed += r.event_log() == a;
  }
  return {identical == 20 && replayed == 20,
          "byte-identical logs " + std::to_string(identical) + "/20; replay reproduces " +
              std::to_string(replayed) + "/20"};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

Outcome latency() {
  const std::string csv = tu::synthetic_csv(15, 100000, 8);
  std::vector<double> end_to_end, hinting;
  for (int run = 0; run < 10; ++run) {
    auto t0 = Clock::now();
    Table t = parse_table(csv);
    QueryGraph g = build_graph(t);
    SearchConfig c;
    c.seed = static_cast<std::uint64_t>(run);
    c.iterations = 100;
    SearchResult r = run_search(t, g, RuleSet(), RewardModels(), c);
    end_to_end.push_back(seconds_since(t0));
    auto t1 = Clock::now();
    HintConfig hc;
    auto candidates = generate_candidate_hints(g, r, t, hc.per_hint_cap);
    select_top_k(candidates, hc.k, hc.budget);
    hinting.push_back(seconds_since(t1));
  }
  double e = median(end_to_end), h = median(hinting);
  return {e <= 2.0 && h <= 0.050,
          "recommend median " + fmt("%.3f", e) + " s (<= 2 s); hints median " +
              fmt("%.2f", h * 1000.0) + " ms (<= 50 ms)"};
}

Outcome exploration_decay() {
  const Table& t = tu::flights();
  QueryGraph g = build_graph(t);
  SearchConfig c;
  const std::vector<Action> path = {{Layer::kMark, static_cast<int>(Mark::kBar)},
                                    {Layer::kXField, 0},
                                    {Layer::kYField, 1},
                                    {Layer::kAggregate, static_cast<int>(Aggregate::kAvg)}};
  std::mt19937_64 rng(4242);
  PartialQuery s = g.empty_query();
  Outcome o;
  std::ostringstream d;
  for (std::size_t depth = 0; depth <= path.size(); ++depth) {
    const int n = 10000;
    int random = 0;
    for (int i = 0; i < n; ++i) random += select_action(g, s, t, rng, c).random;
    double freq = random / static_cast<double>(n);
    double want = c.explore_p0 * std::pow(c.explore_alpha, static_cast<double>(depth));
    bool ok = std::abs(freq - want) <= 0.03;
    o.pass &= ok;
    d << "d" << depth << " " << fmt("%.4f", freq) << " vs " << fmt("%.4f", want) << (ok ? "" : " (bad)")
      << (depth < path.size() ? "; " : "");
    if (depth < path.size()) s.push(path[depth]);
  }
  o.detail = d.str();
  return o;
}

}  // namespace

int main() {
  report(1, "node accounting", 1.0, node_accounting);
  report(2, "small-space optimality", 30.0, small_space_optimality);
  report(3, "greedy vs exact hint selection", 20.0, hint_selection);
  report(4, "ucb / exploration / composite reward arithmetic", 5.0, formula_arithmetic);
  report(5, "rule soundness fuzz", 60.0, rule_soundness);
  report(6, "feedback refinement", 60.0, feedback_refinement);
  report(7, "determinism and replay", 60.0, determinism);
  report(8, "latency envelope", 0.0, latency);
  report(9, "exploration decay", 0.0, exploration_decay);
  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
