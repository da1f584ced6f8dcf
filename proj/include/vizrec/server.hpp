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

// JSON-over-HTTP service for datasets and sessions. Routes live under
// /api/v1; see docs/formats.md for payloads and schemas/ for their JSON
// Schemas.
//
// Datasets are immutable once uploaded and shared between sessions. Each
// session has its own mutex, so mutations of one session are serialized while
// distinct sessions proceed in parallel. With a data directory, uploads and
// session event logs are written through to disk and reloaded (by replay) on
// startup.

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vizrec/chart.hpp"
#include "vizrec/error.hpp"
#include "vizrec/rules.hpp"
#include "vizrec/session.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

// ---------------------------------------------------------------------------
// Payload helpers shared with the CLI.

inline nlohmann::json column_to_json(const Column& c) {
  nlohmann::json stats = {{"distinct_count", c.stats.distinct_count},
                          {"unique_ratio", c.stats.unique_ratio},
                          {"null_count", c.stats.null_count},
                          {"min", c.stats.min ? cell_to_json(*c.stats.min) : nlohmann::json()},
                          {"max", c.stats.max ? cell_to_json(*c.stats.max) : nlohmann::json()}};
  nlohmann::json samples = nlohmann::json::array();
  for (const Cell& v : c.stats.sample_values) samples.push_back(cell_to_json(v));
  stats["sample_values"] = std::move(samples);
  return {{"name", c.name}, {"type", std::string(to_string(c.semantic_type))}, {"stats", stats}};
}

inline nlohmann::json table_to_json(const Table& t) {
  nlohmann::json cols = nlohmann::json::array();
  for (const Column& c : t.columns()) cols.push_back(column_to_json(c));
  return {{"name", t.name()}, {"rows", t.row_count()}, {"columns", std::move(cols)}};
}

inline nlohmann::json rules_to_json(const RuleSet& rules) {
  nlohmann::json list = nlohmann::json::array();
  for (const Rule& r : rules.rules()) {
    list.push_back(
        {{"id", r.id}, {"stage", std::string(to_string(r.stage))}, {"description", r.description}});
  }
  const RuleThresholds& t = rules.thresholds();
  return {{"rules", std::move(list)},
          {"thresholds",
           {{"max_bar_categories", t.max_bar_categories},
            {"max_pie_slices", t.max_pie_slices},
            {"min_line_points", t.min_line_points}}}};
}

// Round payload with a chart spec attached to every recommendation.
inline nlohmann::json round_response(const Session& s, const RoundRecord& r) {
  nlohmann::json j = s.round_payload(r);
  for (std::size_t i = 0; i < r.recommendations.ranked.size(); ++i) {
    j["recommendations"][i]["spec"] = to_chart_spec(*r.recommendations.ranked[i].data);
  }
  j["session_id"] = s.id();
  j["hint_selected"] = r.hint_selected ? nlohmann::json(*r.hint_selected) : nlohmann::json();
  j["user_kept"] = r.user_kept;
  return j;
}

struct ApiError {
  int status = 500;
  std::string code = "internal";
  std::string message;
  std::string detail;
};

inline ApiError map_error(const Error& e) {
  const std::string& d = e.domain();
  const std::string& k = e.kind_name();
  if (d == "IngestError" || d == "ParseError" || d == "RangeError" || d == "ModelError") {
    return {400, "bad_request", e.what(), d + "::" + k};
  }
  if (d == "SessionError") {
    if (k == "UnknownHint" || k == "UnknownRound") return {404, "not_found", e.what(), d + "::" + k};
    if (k == "UnknownQuery") return {400, "bad_request", e.what(), d + "::" + k};
  }
  if (d == "FreezeError" || d == "SearchError") return {409, "conflict", e.what(), d + "::" + k};
  return {500, "internal", e.what(), d + "::" + k};
}

inline nlohmann::json to_json(const ApiError& e) {
  return {{"error", {{"code", e.code}, {"message", e.message}, {"detail", e.detail}}}};
}

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> ui_dir;
  SessionConfig defaults;
  RewardModels models;
  Clock clock = utc_now;
};

class Server {
 public:
  explicit Server(ServerOptions options) : options_(std::move(options)) {
    if (options_.data_dir) restore();
    routes();
  }

  // Blocks until stop().
  bool listen() { return http_.listen(options_.host, options_.port); }
  // Binds an ephemeral port and returns it; follow with listen_after_bind().
  int bind_any_port() { return http_.bind_to_any_port(options_.host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }
  bool is_running() const { return http_.is_running(); }
  void wait_until_ready() const { http_.wait_until_ready(); }

 private:
  struct SessionSlot {
    std::mutex mu;
    std::string dataset_id;
    std::optional<Session> session;
  };

  using Req = httplib::Request;
  using Res = httplib::Response;

  static void reply(Res& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void fail(Res& res, const ApiError& e) { reply(res, e.status, to_json(e)); }

  template <class F>
  static void guarded(Res& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      fail(res, map_error(e));
    } catch (const nlohmann::json::exception& e) {
      fail(res, {400, "bad_request", std::string("malformed JSON: ") + e.what(), "json"});
    } catch (const std::exception& e) {
      fail(res, {500, "internal", e.what(), "std::exception"});
    }
  }

  std::shared_ptr<const Table> dataset(const std::string& id) const {
    std::shared_lock lock(datasets_mu_);
    auto it = datasets_.find(id);
    return it == datasets_.end() ? nullptr : it->second;
  }

  std::shared_ptr<SessionSlot> slot(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::optional<std::filesystem::path> dir(const char* sub) const {
    if (!options_.data_dir) return std::nullopt;
    auto p = *options_.data_dir / sub;
    std::filesystem::create_directories(p);
    return p;
  }

  std::function<void(const std::string&)> log_sink(const std::string& session_id) const {
    auto d = dir("sessions");
    if (!d) return {};
    auto path = *d / (session_id + ".jsonl");
    return [path](const std::string& line) {
      std::ofstream out(path, std::ios::app);
      out << line << '\n';
    };
  }

  void restore() {
    namespace fs = std::filesystem;
    if (auto d = dir("datasets")) {
      for (const auto& entry : fs::directory_iterator(*d)) {
        if (entry.path().extension() != ".csv") continue;
        IngestOptions opts;
        std::string id = entry.path().stem().string();
        std::ifstream meta(entry.path().string() + ".name");
        std::getline(meta, opts.name);
        datasets_[id] = std::make_shared<const Table>(load_table(entry.path(), opts));
        bump(next_dataset_, id);
      }
    }
    if (auto d = dir("sessions")) {
      for (const auto& entry : fs::directory_iterator(*d)) {
        if (entry.path().extension() != ".jsonl") continue;
        std::string id = entry.path().stem().string();
        std::ifstream meta(*d / (id + ".dataset"));
        std::string dataset_id;
        std::getline(meta, dataset_id);
        auto table = dataset(dataset_id);
        if (!table) continue;
        std::ifstream in(entry.path());
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) lines.push_back(line);
        auto s = std::make_shared<SessionSlot>();
        s->dataset_id = dataset_id;
        try {
          s->session.emplace(replay_session(table, lines, options_.clock));
        } catch (const Error& e) {
          // A corrupt log must not keep the server down; its id stays reserved.
          std::cerr << "vizrec: skipping session " << id << ": " << e.what() << '\n';
          bump(next_session_, id);
          continue;
        }
        s->session->set_sink(log_sink(id));
        sessions_[id] = s;
        bump(next_session_, id);
      }
    }
  }

  static void bump(std::atomic<int>& counter, const std::string& id) {
    if (id.size() < 2) return;
    try {
      int n = std::stoi(id.substr(1));
      int cur = counter.load();
      while (n >= cur && !counter.compare_exchange_weak(cur, n + 1)) {
      }
    } catch (const std::exception&) {
    }
  }

  void routes() {
    if (options_.ui_dir) http_.set_mount_point("/", options_.ui_dir->string());

    http_.Get("/api/v1/health", [](const Req&, Res& res) { reply(res, 200, {{"status", "ok"}}); });

    http_.Get("/api/v1/rules", [](const Req&, Res& res) { reply(res, 200, rules_to_json(RuleSet())); });

    http_.Post("/api/v1/datasets", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        IngestOptions opts;
        opts.name = req.has_param("name") ? req.get_param_value("name") : "dataset";
        if (req.has_param("delimiter")) {
          std::string d = req.get_param_value("delimiter");
          if (d == "tab" || d == "\\t") d = "\t";
          if (d.size() != 1) {
            fail(res, {400, "bad_request", "delimiter must be one character", "delimiter"});
            return;
          }
          opts.delimiter = d[0];
        }
        auto table = std::make_shared<const Table>(parse_table(req.body, opts));
        std::string id = "d" + std::to_string(next_dataset_++);
        {
          std::unique_lock lock(datasets_mu_);
          datasets_[id] = table;
        }
        if (auto d = dir("datasets")) {
          std::ofstream(*d / (id + ".csv")) << write_delimited(*table);
          std::ofstream(*d / (id + ".csv.name")) << table->name() << '\n';
        }
        nlohmann::json body = table_to_json(*table);
        body["dataset_id"] = id;
        reply(res, 201, body);
      });
    });

    http_.Get(R"(/api/v1/datasets/([^/]+))", [this](const Req& req, Res& res) {
      auto table = dataset(req.matches[1]);
      if (!table) return fail(res, {404, "not_found", "unknown dataset", req.matches[1]});
      nlohmann::json body = table_to_json(*table);
      body["dataset_id"] = req.matches[1];
      reply(res, 200, body);
    });

    http_.Post("/api/v1/sessions", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        nlohmann::json body = req.body.empty() ? nlohmann::json::object()
                                                : nlohmann::json::parse(req.body);
        if (!body.is_object() || !body.contains("dataset_id") || !body["dataset_id"].is_string()) {
          return fail(res, {400, "bad_request", "dataset_id is required", "dataset_id"});
        }
        std::string dataset_id = body["dataset_id"];
        auto table = dataset(dataset_id);
        if (!table) return fail(res, {404, "not_found", "unknown dataset", dataset_id});
        SessionConfig config = options_.defaults;
        if (body.contains("config")) config = session_config_from_json(body["config"], config);
        if (body.contains("seed")) {
          config.search.seed = body["seed"].get<std::uint64_t>();
        }
        std::string id = "s" + std::to_string(next_session_++);
        // Nothing is persisted unless round 1 succeeds.
        std::vector<std::string> pending;
        Session s = Session::start(id, table, config, options_.models, RuleSet(), options_.clock,
                                   [&pending](const std::string& l) { pending.push_back(l); });
        auto sink = log_sink(id);
        if (sink) {
          std::ofstream(*dir("sessions") / (id + ".dataset")) << dataset_id << '\n';
          for (const std::string& l : pending) sink(l);
        }
        s.set_sink(std::move(sink));
        auto sl = std::make_shared<SessionSlot>();
        sl->dataset_id = dataset_id;
        sl->session.emplace(std::move(s));
        nlohmann::json out = round_response(*sl->session, sl->session->latest());
        {
          std::unique_lock lock(sessions_mu_);
          sessions_[id] = sl;
        }
        reply(res, 201, out);
      });
    });

    http_.Get(R"(/api/v1/sessions/([^/]+))", [this](const Req& req, Res& res) {
      auto sl = slot(req.matches[1]);
      if (!sl) return fail(res, {404, "not_found", "unknown session", req.matches[1]});
      std::lock_guard lock(sl->mu);
      const Session& s = *sl->session;
      nlohmann::json rounds = nlohmann::json::array();
      for (const RoundRecord& r : s.history()) {
        rounds.push_back({{"round", r.round},
                          {"hint_selected", r.hint_selected ? nlohmann::json(*r.hint_selected)
                                                            : nlohmann::json()},
                          {"user_kept", r.user_kept},
                          {"timestamp", r.timestamp}});
      }
      nlohmann::json constraints = nlohmann::json::array();
      for (const auto& [layer, keep] : s.active_constraints()) {
        nlohmann::json labels = nlohmann::json::array();
        for (const Action& a : keep) labels.push_back(s.graph().node(s.graph().node_for(a)).label);
        constraints.push_back({{"layer", std::string(to_string(layer))}, {"keep", labels}});
      }
      reply(res, 200,
            {{"session_id", s.id()},
             {"dataset_id", sl->dataset_id},
             {"round", s.round()},
             {"rounds", rounds},
             {"active_constraints", constraints},
             {"kept", s.cumulative_kept()}});
    });

    http_.Get(R"(/api/v1/sessions/([^/]+)/rounds/(\d+))", [this](const Req& req, Res& res) {
      auto sl = slot(req.matches[1]);
      if (!sl) return fail(res, {404, "not_found", "unknown session", req.matches[1]});
      guarded(res, [&] {
        std::lock_guard lock(sl->mu);
        const Session& s = *sl->session;
        reply(res, 200, round_response(s, s.round_record(std::stoi(req.matches[2]))));
      });
    });

    http_.Post(R"(/api/v1/sessions/([^/]+)/hints/(-?\d+))", [this](const Req& req, Res& res) {
      auto sl = slot(req.matches[1]);
      if (!sl) return fail(res, {404, "not_found", "unknown session", req.matches[1]});
      guarded(res, [&] {
        nlohmann::json body = req.body.empty() ? nlohmann::json::object()
                                                : nlohmann::json::parse(req.body);
        std::lock_guard lock(sl->mu);
        Session& s = *sl->session;
        if (body.contains("round") && body["round"].get<int>() != s.round()) {
          return fail(res, {409, "conflict", "round " + body["round"].dump() + " is not current",
                            "stale_round"});
        }
        const RoundRecord& r =
            s.apply_hint(std::stoi(req.matches[2]), body.value("reset_constraints", false));
        reply(res, 200, round_response(s, r));
      });
    });

    http_.Post(R"(/api/v1/sessions/([^/]+)/kept)", [this](const Req& req, Res& res) {
      auto sl = slot(req.matches[1]);
      if (!sl) return fail(res, {404, "not_found", "unknown session", req.matches[1]});
      guarded(res, [&] {
        nlohmann::json body = nlohmann::json::parse(req.body);
        std::lock_guard lock(sl->mu);
        Session& s = *sl->session;
        int round = body.value("round", s.round());
        auto kept = body.at("kept").get<std::vector<std::string>>();
        s.record_kept(round, kept);
        reply(res, 200, {{"round", round}, {"kept", kept}, {"cumulative_kept", s.cumulative_kept()}});
      });
    });

    http_.Get(R"(/api/v1/sessions/([^/]+)/graph)", [this](const Req& req, Res& res) {
      auto sl = slot(req.matches[1]);
      if (!sl) return fail(res, {404, "not_found", "unknown session", req.matches[1]});
      std::lock_guard lock(sl->mu);
      reply(res, 200, sl->session->graph().dump());
    });

    http_.set_error_handler([](const Req&, Res& res) {
      if (res.body.empty()) {
        std::string code = res.status == 404 ? "not_found"
                           : res.status >= 500 ? "internal"
                                               : "bad_request";
        res.set_content(to_json(ApiError{res.status, code, httplib::status_message(res.status), ""})
                            .dump(),
                        "application/json");
      }
    });
  }

  ServerOptions options_;
  httplib::Server http_;
  mutable std::shared_mutex datasets_mu_;
  std::map<std::string, std::shared_ptr<const Table>> datasets_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  std::atomic<int> next_dataset_{1};
  std::atomic<int> next_session_{1};
};

}  // namespace vizrec
