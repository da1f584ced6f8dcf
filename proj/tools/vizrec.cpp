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

// Command-line front end: batch recommendation, hints, rule listing, scripted
// sessions, log replay, model training and the HTTP service.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vizrec/vizrec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SearchFlags {
  std::string data;
  std::string config_path;
  std::string scorer_path;
  std::string preference_path;
  std::string delimiter = ",";
  std::optional<std::size_t> top_k;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iterations;
  std::optional<double> c;
  std::optional<double> beta;
  bool bin = false, sort = false, topk = false, filter = false;
};

void add_search_flags(CLI::App* app, SearchFlags& f) {
  app->add_option("data", f.data, "Delimited text file (CSV by default)")->required();
  app->add_option("--config", f.config_path, "JSON config file (keys as in docs/formats.md)");
  app->add_option("--scorer", f.scorer_path, "Feature scorer model file");
  app->add_option("--preference", f.preference_path, "Preference model file");
  app->add_option("--delimiter", f.delimiter, "Field delimiter; 'tab' for TSV");
  app->add_option("--top-k", f.top_k, "Number of recommendations");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--iterations", f.iterations, "Search iterations");
  app->add_option("--c", f.c, "UCB exploration constant");
  app->add_option("--beta", f.beta, "Weight of the data-feature score");
  app->add_flag("--bin", f.bin, "Enable the bin layer");
  app->add_flag("--sort", f.sort, "Enable the sort layer");
  app->add_flag("--topk", f.topk, "Enable the top-k layer");
  app->add_flag("--filter", f.filter, "Enable the filter layer");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw vizrec::IngestError(vizrec::IngestError::Kind::FileNotFound, "file not found: " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw vizrec::ModelError(vizrec::ModelError::Kind::BadFormat, path + ": " + e.what());
  }
}

char delimiter_of(const std::string& d) {
  if (d == "tab" || d == "\\t") return '\t';
  if (d.size() != 1) {
    throw vizrec::RangeError(vizrec::RangeError::Kind::OutOfRange,
                             "delimiter must be a single character");
  }
  return d[0];
}

std::shared_ptr<const vizrec::Table> load(const SearchFlags& f) {
  vizrec::IngestOptions opts;
  opts.delimiter = delimiter_of(f.delimiter);
  return std::make_shared<const vizrec::Table>(vizrec::load_table(f.data, opts));
}

vizrec::SessionConfig config_of(const SearchFlags& f) {
  vizrec::SessionConfig c;
  if (!f.config_path.empty()) c = vizrec::session_config_from_json(read_json_file(f.config_path));
  if (f.top_k) c.search.top_k = *f.top_k;
  if (f.seed) c.search.seed = *f.seed;
  if (f.iterations) c.search.iterations = *f.iterations;
  if (f.c) c.search.ucb_c = *f.c;
  if (f.beta) c.search.beta = *f.beta;
  c.graph.bin |= f.bin;
  c.graph.sort |= f.sort;
  c.graph.topk |= f.topk;
  c.graph.filter |= f.filter;
  c.search.validate();
  return c;
}

vizrec::RewardModels models_of(const SearchFlags& f, const vizrec::SessionConfig& c) {
  vizrec::RewardModels m;
  if (!f.scorer_path.empty()) m.scorer = vizrec::scorer_from_json(read_json_file(f.scorer_path));
  if (!f.preference_path.empty()) {
    m.preference = vizrec::preference_from_json(read_json_file(f.preference_path));
  }
  m.beta = c.search.beta;
  return m;
}

std::string fixed(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

void print_ranked(const std::vector<vizrec::RankedEntry>& ranked) {
  std::cout << "rank\tquery\tcrf\ts_d\ts_u\n";
  int rank = 1;
  for (const vizrec::RankedEntry& e : ranked) {
    std::cout << rank++ << '\t' << e.canonical << '\t' << fixed(e.reward.crf) << '\t'
              << fixed(e.reward.s_d) << '\t' << fixed(e.reward.s_u) << '\n';
  }
}

int cmd_recommend(const SearchFlags& f, const std::string& emit_dir, bool stats) {
  auto table = load(f);
  vizrec::SessionConfig c = config_of(f);
  vizrec::QueryGraph graph = vizrec::build_graph(*table, c.graph);
  vizrec::SearchResult r =
      vizrec::run_search(*table, graph, vizrec::RuleSet(), models_of(f, c), c.search);
  print_ranked(r.ranked);
  if (!emit_dir.empty()) {
    fs::create_directories(emit_dir);
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      json spec = vizrec::to_chart_spec(*r.ranked[i].data);
      spec["query"] = r.ranked[i].canonical;
      std::ofstream(fs::path(emit_dir) / ("chart_" + std::to_string(i + 1) + ".json"))
          << spec.dump(2) << '\n';
    }
  }
  if (stats) std::cerr << vizrec::stats_to_json(r.stats, true).dump() << '\n';
  return 0;
}

int cmd_hints(const SearchFlags& f, std::optional<std::size_t> k, std::optional<std::size_t> budget,
              std::optional<std::size_t> cap) {
  auto table = load(f);
  vizrec::SessionConfig c = config_of(f);
  if (k) c.hints.k = *k;
  if (budget) c.hints.budget = *budget;
  if (cap) c.hints.per_hint_cap = *cap;
  vizrec::QueryGraph graph = vizrec::build_graph(*table, c.graph);
  vizrec::SearchResult r =
      vizrec::run_search(*table, graph, vizrec::RuleSet(), models_of(f, c), c.search);
  auto candidates = vizrec::generate_candidate_hints(graph, r, *table, c.hints.per_hint_cap);
  json out = json::array();
  for (const vizrec::Hint& h : vizrec::select_top_k(candidates, c.hints.k, c.hints.budget).chosen) {
    out.push_back(vizrec::hint_to_json(h));
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_rules(bool as_json) {
  vizrec::RuleSet rules;
  if (as_json) {
    std::cout << vizrec::rules_to_json(rules).dump(2) << '\n';
    return 0;
  }
  for (const vizrec::Rule& r : rules.rules()) {
    std::cout << r.id << '\t' << vizrec::to_string(r.stage) << '\t' << r.description << '\n';
  }
  return 0;
}

// A clock that counts instead of reading the wall, for reproducible logs.
vizrec::Clock logical_clock() {
  auto tick = std::make_shared<int>(0);
  return [tick] { return "t" + std::to_string((*tick)++); };
}

int cmd_session(const SearchFlags& f, const std::vector<int>& apply, bool reset,
                const std::string& log_path, bool logical) {
  auto table = load(f);
  vizrec::SessionConfig c = config_of(f);
  std::ofstream log;
  std::function<void(const std::string&)> sink;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + log_path);
    sink = [&log](const std::string& line) { log << line << '\n'; };
  }
  vizrec::Session s =
      vizrec::Session::start("cli", table, c, models_of(f, c), vizrec::RuleSet(),
                             logical ? logical_clock() : vizrec::Clock(vizrec::utc_now), sink);
  for (int id : apply) s.apply_hint(id, reset);
  for (const vizrec::RoundRecord& r : s.history()) {
    std::cout << "# round " << r.round;
    if (r.hint_selected) std::cout << " (hint " << *r.hint_selected << " selected)";
    std::cout << '\n';
    print_ranked(r.recommendations.ranked);
  }
  std::cout << "# hints\n";
  for (const vizrec::Hint& h : s.latest().hints_offered) {
    std::cout << h.id << '\t' << fixed(h.avg_score()) << '\t' << h.text << '\n';
  }
  return 0;
}

int cmd_replay(const std::string& log_path, const std::string& data, const std::string& delim) {
  vizrec::IngestOptions opts;
  opts.delimiter = delimiter_of(delim);
  auto table = std::make_shared<const vizrec::Table>(vizrec::load_table(data, opts));
  std::ifstream in(log_path);
  if (!in) {
    throw vizrec::IngestError(vizrec::IngestError::Kind::FileNotFound,
                              "file not found: " + log_path);
  }
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  vizrec::Session s = vizrec::replay_session(table, lines);
  std::cout << "replayed " << s.round() << " round(s) of session " << s.id() << '\n';
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& out_path,
              const vizrec::GbrtConfig& cfg) {
  std::ifstream in(corpus_path);
  if (!in) {
    throw vizrec::IngestError(vizrec::IngestError::Kind::FileNotFound,
                              "file not found: " + corpus_path);
  }
  auto corpus = vizrec::read_corpus_jsonl(in);
  auto model = vizrec::train_feature_scorer(corpus, cfg);
  std::ofstream(out_path) << vizrec::to_json(*model).dump() << '\n';
  std::cout << "trained on " << corpus.size() << " examples; pairwise accuracy "
            << fixed(vizrec::pairwise_accuracy(*model, corpus)) << '\n';
  return 0;
}

int cmd_fit_preference(const std::string& data, const std::string& queries_path,
                       const std::string& out_path) {
  vizrec::Table table = vizrec::load_table(data);
  std::ifstream in(queries_path);
  if (!in) {
    throw vizrec::IngestError(vizrec::IngestError::Kind::FileNotFound,
                              "file not found: " + queries_path);
  }
  std::vector<vizrec::VisualizationConfig> log;
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    log.push_back(vizrec::config_of(vizrec::parse_canonical_text(line), table));
  }
  std::ofstream(out_path) << vizrec::fit_preference(log)->to_json().dump() << '\n';
  std::cout << "fitted " << log.size() << " logged charts\n";
  return 0;
}

int cmd_serve(vizrec::ServerOptions opts) {
  // Route SIGINT/SIGTERM to a waiter thread that stops the listener.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  const std::string where = "http://" + opts.host + ":" + std::to_string(opts.port);
  vizrec::Server server(std::move(opts));
  std::thread waiter([&server, set] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  waiter.detach();
  std::cerr << "listening on " << where << '\n';
  if (!server.listen()) {
    std::cerr << "error: could not listen on " << where << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visualization recommendation engine"};
  app.require_subcommand(1);

  SearchFlags rec;
  std::string emit_dir;
  bool stats = false;
  auto* recommend = app.add_subcommand("recommend", "Rank charts for a dataset");
  add_search_flags(recommend, rec);
  recommend->add_option("--emit-specs", emit_dir, "Write one chart-spec JSON per recommendation");
  recommend->add_flag("--stats", stats, "Print search statistics as JSON on stderr");

  SearchFlags hf;
  std::optional<std::size_t> hint_k, hint_budget, hint_cap;
  auto* hints = app.add_subcommand("hints", "Print the selected hints as JSON");
  add_search_flags(hints, hf);
  hints->add_option("--k", hint_k, "Maximum number of hints");
  hints->add_option("--budget", hint_budget, "Total visualization budget");
  hints->add_option("--cap", hint_cap, "Visualizations per hint");

  bool rules_json = false;
  auto* rules = app.add_subcommand("rules", "Inspect the rule set");
  auto* rules_list = rules->add_subcommand("list", "List rules as id, stage, description");
  rules_list->add_flag("--json", rules_json, "Emit the rule metadata document");
  rules->require_subcommand(1);

  SearchFlags sf;
  std::vector<int> apply;
  bool reset = false, logical = false;
  std::string log_path;
  auto* session = app.add_subcommand("session", "Run a scripted multi-round session");
  add_search_flags(session, sf);
  session->add_option("--apply", apply, "Hint ids to select, one per round, in order")
      ->delimiter(',');
  session->add_flag("--reset-constraints", reset, "Drop earlier constraints on each hint");
  session->add_option("--log", log_path, "Write the event log here");
  session->add_flag("--logical-clock", logical, "Use counter timestamps in the log");

  std::string replay_log, replay_data, replay_delim = ",";
  auto* replay = app.add_subcommand("replay", "Re-execute a session log and verify it");
  replay->add_option("log", replay_log, "Session event log")->required();
  replay->add_option("--data", replay_data, "The dataset the session used")->required();
  replay->add_option("--delimiter", replay_delim, "Field delimiter; 'tab' for TSV");

  std::string corpus, model_out = "model.json";
  vizrec::GbrtConfig gbrt;
  auto* train = app.add_subcommand("train", "Train a feature scorer from a graded corpus");
  train->add_option("corpus", corpus, "JSON lines of {features, grade}")->required();
  train->add_option("-o,--output", model_out, "Model file to write");
  train->add_option("--trees", gbrt.trees, "Number of trees");
  train->add_option("--depth", gbrt.max_depth, "Maximum tree depth");
  train->add_option("--learning-rate", gbrt.learning_rate, "Shrinkage");
  train->add_option("--seed", gbrt.seed, "Pair sampling seed");

  std::string pref_data, pref_queries, pref_out = "preference.json";
  auto* fitp = app.add_subcommand("fit-preference", "Fit the preference model from logged charts");
  fitp->add_option("data", pref_data, "Dataset the charts were drawn from")->required();
  fitp->add_option("queries", pref_queries, "One canonical query per line")->required();
  fitp->add_option("-o,--output", pref_out, "Model file to write");

  vizrec::ServerOptions sopts;
  if (const char* p = std::getenv("PORT")) sopts.port = std::atoi(p);
  std::string data_dir, ui_dir, serve_config, serve_scorer, serve_pref;
  if (const char* d = std::getenv("DATA_DIR")) data_dir = d;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", sopts.host, "Bind address");
  serve->add_option("--port", sopts.port, "Port (env PORT)");
  serve->add_option("--data-dir", data_dir, "Persist datasets and session logs here (env DATA_DIR)");
  serve->add_option("--with-ui", ui_dir, "Serve a static UI bundle from this directory");
  serve->add_option("--config", serve_config, "Default session config (JSON)");
  serve->add_option("--scorer", serve_scorer, "Feature scorer model file");
  serve->add_option("--preference", serve_pref, "Preference model file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*recommend) return cmd_recommend(rec, emit_dir, stats);
    if (*hints) return cmd_hints(hf, hint_k, hint_budget, hint_cap);
    if (*rules) return cmd_rules(rules_json);
    if (*session) return cmd_session(sf, apply, reset, log_path, logical);
    if (*replay) return cmd_replay(replay_log, replay_data, replay_delim);
    if (*train) return cmd_train(corpus, model_out, gbrt);
    if (*fitp) return cmd_fit_preference(pref_data, pref_queries, pref_out);
    if (*serve) {
      if (!data_dir.empty()) sopts.data_dir = data_dir;
      if (!ui_dir.empty()) sopts.ui_dir = ui_dir;
      if (!serve_config.empty()) {
        sopts.defaults = vizrec::session_config_from_json(read_json_file(serve_config));
      }
      if (!serve_scorer.empty()) sopts.models.scorer = vizrec::scorer_from_json(read_json_file(serve_scorer));
      if (!serve_pref.empty()) {
        sopts.models.preference = vizrec::preference_from_json(read_json_file(serve_pref));
      }
      return cmd_serve(std::move(sopts));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
