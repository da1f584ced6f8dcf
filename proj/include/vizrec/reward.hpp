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

// Composite reward: crf = s_k * (beta * s_d + (1 - beta) * s_u), where s_k is
// rule validity, s_d the data-feature score and s_u the preference score.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vizrec/chart.hpp"
#include "vizrec/error.hpp"
#include "vizrec/features.hpp"
#include "vizrec/query.hpp"
#include "vizrec/rules.hpp"
#include "vizrec/scorer.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

// ---------------------------------------------------------------------------
// Preference models.

// Dataset-independent design choices of a chart.
struct VisualizationConfig {
  Mark mark = Mark::kBar;
  Aggregate aggregate = Aggregate::kNone;
  bool has_color = false;
  bool has_topk = false;
  SemanticType x_type = SemanticType::kCategorical;
  SemanticType y_type = SemanticType::kNumeric;

  friend bool operator==(const VisualizationConfig&, const VisualizationConfig&) = default;
};

inline std::string config_key(const VisualizationConfig& c) {
  std::string k;
  k += to_string(c.mark);
  k += ':';
  k += to_string(c.aggregate);
  k += c.has_color ? ":color" : ":nocolor";
  k += c.has_topk ? ":topk" : ":notopk";
  k += ':';
  k += to_string(c.x_type);
  k += ':';
  k += to_string(c.y_type);
  return k;
}

inline VisualizationConfig config_of(const VisQuery& q, const Table& table) {
  VisualizationConfig c;
  c.mark = q.mark;
  c.aggregate = q.encoding.aggregate;
  c.has_color = q.encoding.color_field.has_value() ||
                (q.transform.group_field && *q.transform.group_field != q.encoding.x_field);
  c.has_topk = q.transform.topk.has_value();
  if (auto x = table.find_column(q.encoding.x_field)) c.x_type = table.type_of(*x);
  if (auto y = table.find_column(q.encoding.y_field)) c.y_type = table.type_of(*y);
  return c;
}

class PreferenceModel {
 public:
  virtual ~PreferenceModel() = default;
  virtual double score(const VisualizationConfig& config) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

class UniformPreference final : public PreferenceModel {
 public:
  double score(const VisualizationConfig&) const override { return 0.5; }
  nlohmann::json to_json() const override { return {{"kind", "uniform"}}; }
};

// Laplace-smoothed frequency of each configuration in a usage log:
// (count(config) + 1) / (N + K), where K is the number of distinct logged
// configurations. An empty log scores every configuration 0.5.
class FrequencyPreference final : public PreferenceModel {
 public:
  FrequencyPreference(std::map<std::string, std::uint64_t> counts, std::uint64_t total)
      : counts_(std::move(counts)), total_(total) {}

  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }

  double score(const VisualizationConfig& config) const override {
    if (total_ == 0 || counts_.empty()) return 0.5;
    auto it = counts_.find(config_key(config));
    double c = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
    double v = (c + 1.0) / (static_cast<double>(total_) + static_cast<double>(counts_.size()));
    return std::min(1.0, v);
  }

  nlohmann::json to_json() const override {
    return {{"kind", "freq"}, {"counts", counts_}, {"total", total_}};
  }

 private:
  std::map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline std::shared_ptr<const FrequencyPreference> fit_preference(
    const std::vector<VisualizationConfig>& log) {
  std::map<std::string, std::uint64_t> counts;
  for (const VisualizationConfig& c : log) ++counts[config_key(c)];
  return std::make_shared<FrequencyPreference>(std::move(counts), log.size());
}

inline std::shared_ptr<const PreferenceModel> preference_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") return std::make_shared<UniformPreference>();
    if (kind == "freq") {
      auto counts = j.at("counts").get<std::map<std::string, std::uint64_t>>();
      std::uint64_t total = j.at("total").get<std::uint64_t>();
      std::uint64_t sum = 0;
      for (const auto& [k, v] : counts) sum += v;
      if (sum > total) {
        throw ModelError(ModelError::Kind::BadFormat, "preference counts exceed total");
      }
      return std::make_shared<FrequencyPreference>(std::move(counts), total);
    }
    throw ModelError(ModelError::Kind::BadFormat, "unknown preference kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(ModelError::Kind::BadFormat,
                     std::string("malformed preference model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Composite reward.

struct RewardBreakdown {
  int s_k = 0;
  double s_d = 0.0;
  double s_u = 0.0;
  double beta = 0.6;
  double crf = 0.0;
  std::vector<std::string> violated_rules;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

inline constexpr double kDefaultBeta = 0.6;

inline RewardBreakdown composite_reward(int s_k, double s_d, double s_u,
                                        double beta = kDefaultBeta) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (s_k != 0 && s_k != 1) throw RangeError(RangeError::Kind::OutOfRange, "s_k must be 0 or 1");
  if (!in_unit(s_d)) throw RangeError(RangeError::Kind::OutOfRange, "s_d must lie in [0,1]");
  if (!in_unit(s_u)) throw RangeError(RangeError::Kind::OutOfRange, "s_u must lie in [0,1]");
  if (!in_unit(beta)) throw RangeError(RangeError::Kind::OutOfRange, "beta must lie in [0,1]");
  RewardBreakdown r;
  r.s_k = s_k;
  r.s_d = s_d;
  r.s_u = s_u;
  r.beta = beta;
  r.crf = static_cast<double>(s_k) * (beta * s_d + (1.0 - beta) * s_u);
  return r;
}

struct RewardModels {
  std::shared_ptr<const ScorerModel> scorer = std::make_shared<HeuristicScorer>();
  std::shared_ptr<const PreferenceModel> preference = std::make_shared<UniformPreference>();
  double beta = kDefaultBeta;
};

// A scored query. `data` is absent when execution failed; `exec_error` then
// holds the reason and s_k is 0.
struct Evaluation {
  VisQuery query;
  std::string canonical;
  std::shared_ptr<const ChartData> data;
  RewardBreakdown reward;
  std::optional<std::string> exec_error;
};

inline Evaluation evaluate(const VisQuery& query, const Table& table, const RuleSet& rules,
                           const RewardModels& models) {
  Evaluation ev;
  ev.query = query;
  ev.canonical = to_canonical_text(query);
  try {
    ev.data = std::make_shared<const ChartData>(execute(query, table));
  } catch (const ExecError& e) {
    ev.exec_error = e.what();
    ev.reward = composite_reward(0, 0.0, 0.0, models.beta);
    return ev;
  }
  Validity v = check_validity(query, table, *ev.data, rules);
  FeatureVector f = extract_features(query, table, *ev.data);
  double s_d = models.scorer->score(f);
  double s_u = std::min(1.0, std::max(0.0, models.preference->score(config_of(query, table))));
  ev.reward = composite_reward(v.s_k, s_d, s_u, models.beta);
  ev.reward.violated_rules = std::move(v.violated);
  return ev;
}

}  // namespace vizrec
