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

// Multi-round recommendation sessions.
//
// Round 1 searches the unconstrained graph. Applying a hint narrows the
// graph by freezing every node outside the hint's keep-sets (cumulatively,
// across rounds) and searches again on the same graph, so edge statistics
// carry over. Every operation appends one JSON line to the session's event
// log; replay_session() re-executes a log and checks that each round comes
// out identical.

#pragma once

#include <chrono>
#include <cstdio>
#include <cstdint>
#include <ctime>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vizrec/chart.hpp"
#include "vizrec/error.hpp"
#include "vizrec/graph.hpp"
#include "vizrec/hints.hpp"
#include "vizrec/reward.hpp"
#include "vizrec/rules.hpp"
#include "vizrec/search.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

struct SessionConfig {
  SearchConfig search;
  HintConfig hints;
  GraphConfig graph;
};

// ---------------------------------------------------------------------------
// Config JSON. Missing keys keep their defaults.

inline nlohmann::json to_json(const SessionConfig& c) {
  return {{"iterations", c.search.iterations},
          {"c", c.search.ucb_c},
          {"p0", c.search.explore_p0},
          {"alpha", c.search.explore_alpha},
          {"top_k", c.search.top_k},
          {"seed", c.search.seed},
          {"beta", c.search.beta},
          {"hint_k", c.hints.k},
          {"hint_budget", c.hints.budget},
          {"hint_cap", c.hints.per_hint_cap},
          {"layers",
           {{"bin", c.graph.bin},
            {"sort", c.graph.sort},
            {"topk", c.graph.topk},
            {"filter", c.graph.filter}}}};
}

inline SessionConfig session_config_from_json(const nlohmann::json& j,
                                              SessionConfig c = SessionConfig()) {
  try {
    if (!j.is_object()) throw RangeError(RangeError::Kind::OutOfRange, "config must be an object");
    c.search.iterations = j.value("iterations", c.search.iterations);
    c.search.ucb_c = j.value("c", c.search.ucb_c);
    c.search.explore_p0 = j.value("p0", c.search.explore_p0);
    c.search.explore_alpha = j.value("alpha", c.search.explore_alpha);
    c.search.top_k = j.value("top_k", c.search.top_k);
    c.search.seed = j.value("seed", c.search.seed);
    c.search.beta = j.value("beta", c.search.beta);
    c.hints.k = j.value("hint_k", c.hints.k);
    c.hints.budget = j.value("hint_budget", c.hints.budget);
    c.hints.per_hint_cap = j.value("hint_cap", c.hints.per_hint_cap);
    if (j.contains("layers")) {
      const nlohmann::json& l = j["layers"];
      c.graph.bin = l.value("bin", c.graph.bin);
      c.graph.sort = l.value("sort", c.graph.sort);
      c.graph.topk = l.value("topk", c.graph.topk);
      c.graph.filter = l.value("filter", c.graph.filter);
    }
  } catch (const nlohmann::json::exception& e) {
    throw RangeError(RangeError::Kind::OutOfRange, std::string("bad config value: ") + e.what());
  }
  c.search.validate();
  if (c.hints.k < 1 || c.hints.budget < 1 || c.hints.per_hint_cap < 1) {
    throw RangeError(RangeError::Kind::OutOfRange, "hint k, budget and cap must be >= 1");
  }
  return c;
}

inline nlohmann::json stats_to_json(const SearchStats& s, bool with_time) {
  nlohmann::json j = {{"iterations_run", s.iterations_run},
                      {"simulations", s.simulations},
                      {"dead_ends", s.dead_ends},
                      {"distinct_queries_seen", s.distinct_queries_seen}};
  if (with_time) j["wall_time_s"] = s.wall_time_s;
  return j;
}

inline nlohmann::json reward_to_json(const RewardBreakdown& r) {
  return {{"crf", r.crf},
          {"s_k", r.s_k},
          {"s_d", r.s_d},
          {"s_u", r.s_u},
          {"beta", r.beta},
          {"violated_rules", r.violated_rules}};
}

// FNV-1a over the table's delimited serialization; identifies the dataset in
// session logs.
inline std::string table_digest(const Table& table) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : write_delimited(table)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Session.

using Clock = std::function<std::string()>;

inline std::string utc_now() {
  auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  auto ms = now.time_since_epoch().count() % 1000;
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

struct RoundRecord {
  int round = 1;
  SearchResult recommendations;
  std::vector<Hint> hints_offered;
  std::optional<int> hint_selected;
  std::vector<std::string> user_kept;
  std::string timestamp;
};

using ActiveConstraints = std::map<Layer, std::set<Action>>;

class Session {
 public:
  // Builds the graph, runs round 1 and logs it. Propagates SearchError.
  static Session start(std::string id, std::shared_ptr<const Table> table, SessionConfig config,
                       RewardModels models = {}, RuleSet rules = {}, Clock clock = utc_now,
                       std::function<void(const std::string&)> sink = {}) {
    Session s(std::move(id), std::move(table), config, std::move(models), std::move(rules),
              std::move(clock), std::move(sink));
    s.graph_ = build_graph(*s.table_, config.graph);
    RoundRecord r = s.run_round(s.graph_, 1);
    s.emit("start", s.start_payload());
    s.history_.push_back(std::move(r));
    s.emit("round", s.round_payload(s.history_.back()));
    return s;
  }

  const std::string& id() const { return id_; }
  const Table& table() const { return *table_; }
  std::shared_ptr<const Table> table_ptr() const { return table_; }
  const SessionConfig& config() const { return config_; }
  const QueryGraph& graph() const { return graph_; }
  const std::vector<RoundRecord>& history() const { return history_; }
  const RoundRecord& latest() const { return history_.back(); }
  int round() const { return static_cast<int>(history_.size()); }
  const ActiveConstraints& active_constraints() const { return constraints_; }
  const std::vector<std::string>& event_log() const { return log_; }
  // Redirects future events; already-logged lines are not re-sent.
  void set_sink(std::function<void(const std::string&)> sink) { sink_ = std::move(sink); }

  const RoundRecord& round_record(int n) const {
    if (n < 1 || n > round()) {
      throw SessionError(SessionError::Kind::UnknownRound, "no round " + std::to_string(n));
    }
    return history_[static_cast<std::size_t>(n - 1)];
  }

  // Narrows the graph to the hint's constraint (on top of earlier ones unless
  // `reset_constraints`) and runs the next round. On any error the session is
  // left unchanged.
  const RoundRecord& apply_hint(int hint_id, bool reset_constraints = false) {
    const RoundRecord& current = history_.back();
    const Hint* hint = nullptr;
    for (const Hint& h : current.hints_offered) {
      if (h.id == hint_id) hint = &h;
    }
    if (!hint) {
      throw SessionError(SessionError::Kind::UnknownHint,
                         "hint " + std::to_string(hint_id) + " was not offered in round " +
                             std::to_string(current.round));
    }
    ActiveConstraints next = reset_constraints ? ActiveConstraints{} : constraints_;
    for (const HintConstraint& c : hint->constraints) {
      auto it = next.find(c.layer);
      if (it == next.end()) {
        next.emplace(c.layer, c.keep);
        continue;
      }
      std::set<Action> both;
      for (const Action& a : it->second) {
        if (c.keep.count(a)) both.insert(a);
      }
      if (both.empty()) {
        throw FreezeError(FreezeError::Kind::EmptyKeepSet,
                          "hint " + std::to_string(hint_id) + " conflicts with the active " +
                              std::string(to_string(c.layer)) + " constraint");
      }
      it->second = std::move(both);
    }
    QueryGraph narrowed = graph_;
    narrowed.unfreeze_all();
    for (const auto& [layer, keep] : next) narrowed.freeze_except(layer, keep);
    RoundRecord r = run_round(narrowed, round() + 1);

    graph_ = std::move(narrowed);
    constraints_ = std::move(next);
    history_.back().hint_selected = hint_id;
    nlohmann::json constraints = nlohmann::json::array();
    for (const auto& [layer, keep] : constraints_) {
      nlohmann::json labels = nlohmann::json::array();
      for (const Action& a : keep) labels.push_back(graph_.node(graph_.node_for(a)).label);
      constraints.push_back({{"layer", std::string(to_string(layer))}, {"keep", labels}});
    }
    emit("hint", {{"round", current.round},
                  {"hint_id", hint_id},
                  {"reset_constraints", reset_constraints},
                  {"constraints", constraints}});
    history_.push_back(std::move(r));
    emit("round", round_payload(history_.back()));
    return history_.back();
  }

  void record_kept(int round_number, const std::vector<std::string>& kept) {
    round_record(round_number);  // validates the round number
    RoundRecord& r = history_[static_cast<std::size_t>(round_number - 1)];
    for (const std::string& text : kept) {
      bool offered = false;
      for (const RankedEntry& e : r.recommendations.ranked) offered |= e.canonical == text;
      if (!offered) {
        throw SessionError(SessionError::Kind::UnknownQuery,
                           "query not recommended in round " + std::to_string(round_number) +
                               ": " + text);
      }
    }
    r.user_kept = kept;
    emit("kept", {{"round", round_number}, {"kept", kept}});
  }

  // Union of every round's kept queries, first occurrence order.
  std::vector<std::string> cumulative_kept() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const RoundRecord& r : history_) {
      for (const std::string& t : r.user_kept) {
        if (seen.insert(t).second) out.push_back(t);
      }
    }
    return out;
  }

  nlohmann::json round_payload(const RoundRecord& r) const {
    nlohmann::json recs = nlohmann::json::array();
    int rank = 1;
    for (const RankedEntry& e : r.recommendations.ranked) {
      recs.push_back({{"rank", rank++}, {"query", e.canonical}, {"score", reward_to_json(e.reward)}});
    }
    nlohmann::json hints = nlohmann::json::array();
    for (const Hint& h : r.hints_offered) hints.push_back(hint_to_json(h));
    return {{"round", r.round},
            {"recommendations", std::move(recs)},
            {"hints", std::move(hints)},
            {"stats", stats_to_json(r.recommendations.stats, false)}};
  }

  nlohmann::json start_payload() const {
    return {{"session_id", id_},
            {"dataset",
             {{"name", table_->name()},
              {"rows", table_->row_count()},
              {"columns", table_->column_count()},
              {"digest", table_digest(*table_)}}},
            {"config", to_json(config_)},
            {"scorer", to_json(*models_.scorer)},
            {"preference", models_.preference->to_json()}};
  }

 private:
  Session(std::string id, std::shared_ptr<const Table> table, SessionConfig config,
          RewardModels models, RuleSet rules, Clock clock,
          std::function<void(const std::string&)> sink)
      : id_(std::move(id)),
        table_(std::move(table)),
        config_(config),
        models_(std::move(models)),
        rules_(std::move(rules)),
        clock_(std::move(clock)),
        sink_(std::move(sink)) {}

  RoundRecord run_round(QueryGraph& graph, int number) const {
    SearchConfig sc = config_.search;
    sc.seed = config_.search.seed + static_cast<std::uint64_t>(number - 1);
    RoundRecord r;
    r.round = number;
    r.recommendations = run_search(*table_, graph, rules_, models_, sc);
    std::vector<Hint> candidates =
        generate_candidate_hints(graph, r.recommendations, *table_, config_.hints.per_hint_cap);
    r.hints_offered = select_top_k(candidates, config_.hints.k, config_.hints.budget).chosen;
    r.timestamp = clock_();
    return r;
  }

  void emit(const std::string& event, nlohmann::json payload) {
    nlohmann::json line = {{"event", event}, {"payload", std::move(payload)}, {"ts", clock_()}};
    log_.push_back(line.dump());
    if (sink_) sink_(log_.back());
  }

  std::string id_;
  std::shared_ptr<const Table> table_;
  SessionConfig config_;
  RewardModels models_;
  RuleSet rules_;
  Clock clock_;
  std::function<void(const std::string&)> sink_;
  QueryGraph graph_;
  ActiveConstraints constraints_;
  std::vector<RoundRecord> history_;
  std::vector<std::string> log_;
};

// Re-executes a session log against `table`. Every logged round must be
// reproduced exactly (timestamps excepted); otherwise ReplayMismatch.
inline Session replay_session(std::shared_ptr<const Table> table,
                              const std::vector<std::string>& lines, Clock clock = utc_now,
                              std::function<void(const std::string&)> sink = {}) {
  std::vector<nlohmann::json> events;
  for (const std::string& line : lines) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("event") || !j.contains("payload")) {
        throw SessionError(SessionError::Kind::BadLog, "log line lacks event or payload");
      }
      events.push_back(std::move(j));
    } catch (const nlohmann::json::parse_error& e) {
      throw SessionError(SessionError::Kind::BadLog, std::string("unparsable log line: ") + e.what());
    }
  }
  if (events.empty() || events.front()["event"] != "start") {
    throw SessionError(SessionError::Kind::BadLog, "log must begin with a start event");
  }
  const nlohmann::json& start = events.front()["payload"];
  try {
    if (start.at("dataset").at("digest").get<std::string>() != table_digest(*table)) {
      throw SessionError(SessionError::Kind::ReplayMismatch, "dataset digest differs from the log");
    }
    SessionConfig config = session_config_from_json(start.at("config"));
    RewardModels models;
    models.scorer = scorer_from_json(start.at("scorer"));
    models.preference = preference_from_json(start.at("preference"));
    models.beta = config.search.beta;
    Session s = Session::start(start.at("session_id").get<std::string>(), std::move(table), config,
                               std::move(models), RuleSet(), std::move(clock), std::move(sink));
    std::size_t round_events = 0;
    for (std::size_t i = 1; i < events.size(); ++i) {
      const std::string kind = events[i]["event"].get<std::string>();
      const nlohmann::json& p = events[i]["payload"];
      if (kind == "round") {
        int n = p.at("round").get<int>();
        if (n > s.round() || s.round_payload(s.round_record(n)) != p) {
          throw SessionError(SessionError::Kind::ReplayMismatch,
                             "round " + std::to_string(n) + " differs from the log");
        }
        ++round_events;
      } else if (kind == "hint") {
        s.apply_hint(p.at("hint_id").get<int>(), p.value("reset_constraints", false));
      } else if (kind == "kept") {
        s.record_kept(p.at("round").get<int>(), p.at("kept").get<std::vector<std::string>>());
      } else {
        throw SessionError(SessionError::Kind::BadLog, "unknown event '" + kind + "'");
      }
    }
    if (round_events != static_cast<std::size_t>(s.round())) {
      throw SessionError(SessionError::Kind::ReplayMismatch, "log is missing round events");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SessionError(SessionError::Kind::BadLog, std::string("malformed log: ") + e.what());
  }
}

}  // namespace vizrec
