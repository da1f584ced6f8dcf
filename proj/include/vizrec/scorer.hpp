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

// Data-feature scorers. Every model maps a 14-feature vector to [0,1] and
// round-trips through the versioned JSON model format:
//
//   {"kind": "heuristic" | "linear" | "gbrt", "version": 1, "payload": {...}}
//
// train_feature_scorer() fits a gradient-boosted ensemble of shallow
// regression trees on pairwise (RankNet-style) logistic loss.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vizrec/error.hpp"
#include "vizrec/features.hpp"

namespace vizrec {

inline constexpr int kModelVersion = 1;

struct ModelDescriptor {
  std::string kind;
  int version = kModelVersion;
};

class ScorerModel {
 public:
  virtual ~ScorerModel() = default;

  // Throws ModelError::DimensionMismatch unless features.size() == 14.
  double score(std::span<const double> features) const {
    if (features.size() != kFeatureCount) {
      throw ModelError(ModelError::Kind::DimensionMismatch,
                       "expected " + std::to_string(kFeatureCount) + " features, got " +
                           std::to_string(features.size()));
    }
    FeatureVector f{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      f[i] = std::isfinite(features[i]) ? features[i] : 0.0;
    }
    double s = score_impl(f);
    if (!std::isfinite(s)) return 0.0;
    return std::min(1.0, std::max(0.0, s));
  }

  virtual ModelDescriptor descriptor() const = 0;
  virtual nlohmann::json payload() const = 0;

 protected:
  virtual double score_impl(const FeatureVector& f) const = 0;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Hand-weighted default. Contract (each covered by a two-point test):
//  * bar charts lose score past 20 categories;
//  * scatter score grows with |correlation|;
//  * pie charts score best with 2 to 10 slices and non-negative values;
//  * repeated x values (series, or raw rows sharing an x) cost bar and pie
//    charts, pie more so.
class HeuristicScorer final : public ScorerModel {
 public:
  ModelDescriptor descriptor() const override { return {"heuristic", kModelVersion}; }
  nlohmann::json payload() const override { return nlohmann::json::object(); }

 protected:
  double score_impl(const FeatureVector& f) const override {
    const double d = std::round(unscale_count(f[kFeatXDistinct]));
    const int mark = static_cast<int>(std::lround(f[kFeatChartType] * 3.0));
    const double corr = std::abs(f[kFeatCorrelation]);
    const double spread = std::clamp((f[kFeatYMax] - f[kFeatYMin]) / 2.0, 0.0, 1.0);
    // Points per distinct x; 1 for a plain one-value-per-category chart.
    const double ratio = f[kFeatXUniqueRatio];
    const double per_x = ratio > 0.0 ? std::max(1.0, 1.0 / ratio) : 1.0;
    double fit = 0.0;
    switch (static_cast<Mark>(std::clamp(mark, 0, 3))) {
      case Mark::kBar:
        if (d < 2) {
          fit = 0.1;
        } else if (d <= 20) {
          fit = 1.0;
        } else {
          fit = 0.5 * std::max(0.0, 1.0 - (d - 20.0) / 20.0);
        }
        fit /= 1.0 + 0.25 * (per_x - 1.0);
        break;
      case Mark::kPie:
        if (d < 2) {
          fit = 0.0;
        } else if (d <= 10) {
          fit = 1.0;
        } else {
          fit = 0.3 * std::max(0.0, 1.0 - (d - 10.0) / 10.0);
        }
        if (f[kFeatYMin] < 0.0) fit *= 0.2;
        if (per_x > 1.0) fit *= 0.3;
        break;
      case Mark::kLine:
        fit = f[kFeatXType] > 0.0 ? 0.8 + 0.2 * corr : 0.3;
        if (d < 3) fit *= 0.3;
        break;
      case Mark::kScatter:
        fit = 0.2 + 0.8 * corr;
        break;
    }
    return 0.55 * fit + 0.25 * spread + 0.2 * std::clamp(f[kFeatYUniqueRatio], 0.0, 1.0);
  }
};

// sigmoid(w . f + b).
class LinearScorer final : public ScorerModel {
 public:
  LinearScorer(FeatureVector weights, double bias) : weights_(weights), bias_(bias) {}

  const FeatureVector& weights() const { return weights_; }
  double bias() const { return bias_; }

  ModelDescriptor descriptor() const override { return {"linear", kModelVersion}; }
  nlohmann::json payload() const override {
    return {{"weights", weights_}, {"bias", bias_}};
  }

 protected:
  double score_impl(const FeatureVector& f) const override {
    double z = bias_;
    for (std::size_t i = 0; i < kFeatureCount; ++i) z += weights_[i] * f[i];
    return sigmoid(z);
  }

 private:
  FeatureVector weights_;
  double bias_;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const FeatureVector& f) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      i = f[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
};

struct GbrtConfig {
  int trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double l2 = 1.0;
  // Corpora larger than this sample partners per example instead of using
  // every pair.
  std::size_t max_pairs_per_example = 256;
  std::uint64_t seed = 0;
};

// sigmoid(sum of tree outputs). Leaf values already include the learning rate.
class GbrtScorer final : public ScorerModel {
 public:
  GbrtScorer(std::vector<RegressionTree> trees, GbrtConfig config)
      : trees_(std::move(trees)), config_(config) {}

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const GbrtConfig& config() const { return config_; }

  double raw_score(const FeatureVector& f) const {
    double z = 0.0;
    for (const RegressionTree& t : trees_) z += t.predict(f);
    return z;
  }

  ModelDescriptor descriptor() const override { return {"gbrt", kModelVersion}; }
  nlohmann::json payload() const override {
    nlohmann::json trees = nlohmann::json::array();
    for (const RegressionTree& t : trees_) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const TreeNode& n : t.nodes) {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"value", n.value}});
      }
      trees.push_back({{"nodes", std::move(nodes)}});
    }
    return {{"config",
             {{"trees", config_.trees},
              {"max_depth", config_.max_depth},
              {"learning_rate", config_.learning_rate},
              {"l2", config_.l2},
              {"max_pairs_per_example", config_.max_pairs_per_example},
              {"seed", config_.seed}}},
            {"trees", std::move(trees)}};
  }

 protected:
  double score_impl(const FeatureVector& f) const override { return sigmoid(raw_score(f)); }

 private:
  std::vector<RegressionTree> trees_;
  GbrtConfig config_;
};

// ---------------------------------------------------------------------------
// Model files.

inline nlohmann::json to_json(const ScorerModel& model) {
  ModelDescriptor d = model.descriptor();
  return {{"kind", d.kind}, {"version", d.version}, {"payload", model.payload()}};
}

namespace detail {

inline FeatureVector feature_array(const nlohmann::json& j) {
  if (!j.is_array()) throw ModelError(ModelError::Kind::BadFormat, "features must be an array");
  if (j.size() != kFeatureCount) {
    throw ModelError(ModelError::Kind::DimensionMismatch,
                     "expected " + std::to_string(kFeatureCount) + " features, got " +
                         std::to_string(j.size()));
  }
  FeatureVector f{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!j[i].is_number()) {
      throw ModelError(ModelError::Kind::BadFormat, "feature values must be numbers");
    }
    f[i] = j[i].get<double>();
  }
  return f;
}

}  // namespace detail

inline std::shared_ptr<const ScorerModel> scorer_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (j.at("version").get<int>() != kModelVersion) {
      throw ModelError(ModelError::Kind::BadFormat, "unsupported model version");
    }
    const nlohmann::json& p = j.at("payload");
    if (kind == "heuristic") return std::make_shared<HeuristicScorer>();
    if (kind == "linear") {
      return std::make_shared<LinearScorer>(detail::feature_array(p.at("weights")),
                                            p.at("bias").get<double>());
    }
    if (kind == "gbrt") {
      GbrtConfig c;
      const nlohmann::json& pc = p.at("config");
      c.trees = pc.at("trees").get<int>();
      c.max_depth = pc.at("max_depth").get<int>();
      c.learning_rate = pc.at("learning_rate").get<double>();
      c.l2 = pc.at("l2").get<double>();
      c.max_pairs_per_example = pc.at("max_pairs_per_example").get<std::size_t>();
      c.seed = pc.at("seed").get<std::uint64_t>();
      std::vector<RegressionTree> trees;
      for (const auto& jt : p.at("trees")) {
        RegressionTree t;
        for (const auto& jn : jt.at("nodes")) {
          TreeNode n;
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
          n.value = jn.at("value").get<double>();
          if (n.feature >= static_cast<int>(kFeatureCount)) {
            throw ModelError(ModelError::Kind::DimensionMismatch, "split on unknown feature");
          }
          t.nodes.push_back(n);
        }
        const int size = static_cast<int>(t.nodes.size());
        if (size == 0) throw ModelError(ModelError::Kind::BadFormat, "empty tree");
        for (const TreeNode& n : t.nodes) {
          if (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
            throw ModelError(ModelError::Kind::BadFormat, "tree child index out of range");
          }
        }
        trees.push_back(std::move(t));
      }
      return std::make_shared<GbrtScorer>(std::move(trees), c);
    }
    throw ModelError(ModelError::Kind::BadFormat, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(ModelError::Kind::BadFormat, std::string("malformed model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training.

struct LabeledExample {
  FeatureVector features{};
  int grade = 0;
};

// One {"features": [...14 reals], "grade": int} object per line; blank lines
// are skipped.
inline std::vector<LabeledExample> read_corpus_jsonl(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ModelError(ModelError::Kind::BadFormat,
                       "corpus line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("features") || !j.contains("grade") ||
        !j["grade"].is_number_integer()) {
      throw ModelError(ModelError::Kind::BadFormat,
                       "corpus line " + std::to_string(lineno) + ": expected features and grade");
    }
    out.push_back({detail::feature_array(j["features"]), j["grade"].get<int>()});
  }
  return out;
}

namespace detail {

struct TreeBuilder {
  const std::vector<LabeledExample>& data;
  const std::vector<double>& grad;
  const std::vector<double>& hess;
  const GbrtConfig& config;
  RegressionTree tree;

  double leaf_value(const std::vector<std::size_t>& idx) const {
    double g = 0.0, h = 0.0;
    for (std::size_t i : idx) {
      g += grad[i];
      h += hess[i];
    }
    return -config.learning_rate * g / (h + config.l2);
  }

  int build(std::vector<std::size_t> idx, int depth) {
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    double g_total = 0.0, h_total = 0.0;
    for (std::size_t i : idx) {
      g_total += grad[i];
      h_total += hess[i];
    }
    const double parent = g_total * g_total / (h_total + config.l2);
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    if (depth < config.max_depth && idx.size() >= 2) {
      std::vector<std::size_t> order = idx;
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return data[a].features[f] < data[b].features[f];
        });
        double gl = 0.0, hl = 0.0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
          gl += grad[order[k]];
          hl += hess[order[k]];
          double lo = data[order[k]].features[f];
          double hi = data[order[k + 1]].features[f];
          if (!(lo < hi)) continue;
          double gr = g_total - gl, hr = h_total - hl;
          double gain = gl * gl / (hl + config.l2) + gr * gr / (hr + config.l2) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(f);
            best_threshold = lo + (hi - lo) / 2.0;
          }
        }
      }
    }
    if (best_feature < 0) {
      tree.nodes[static_cast<std::size_t>(id)].value = leaf_value(idx);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      (data[i].features[static_cast<std::size_t>(best_feature)] < best_threshold ? left : right)
          .push_back(i);
    }
    int l = build(std::move(left), depth + 1);
    int r = build(std::move(right), depth + 1);
    TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    n.feature = best_feature;
    n.threshold = best_threshold;
    n.left = l;
    n.right = r;
    return id;
  }
};

}  // namespace detail

// Requires at least two distinct grades. Deterministic in (corpus, config).
inline std::shared_ptr<const GbrtScorer> train_feature_scorer(
    const std::vector<LabeledExample>& corpus, const GbrtConfig& config = {}) {
  std::vector<int> grades;
  for (const LabeledExample& e : corpus) grades.push_back(e.grade);
  std::sort(grades.begin(), grades.end());
  grades.erase(std::unique(grades.begin(), grades.end()), grades.end());
  if (grades.size() < 2) {
    throw TrainError(TrainError::Kind::DegenerateCorpus,
                     "training corpus needs at least two distinct grades");
  }
  const std::size_t n = corpus.size();

  // Pair list (winner, loser).
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::mt19937_64 rng(config.seed);
  for (std::size_t i = 0; i < n; ++i) {
    if (n <= config.max_pairs_per_example) {
      for (std::size_t j = 0; j < n; ++j) {
        if (corpus[i].grade > corpus[j].grade) pairs.emplace_back(i, j);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t k = 0; k < config.max_pairs_per_example; ++k) {
        std::size_t j = pick(rng);
        if (corpus[i].grade > corpus[j].grade) pairs.emplace_back(i, j);
      }
    }
  }

  std::vector<RegressionTree> trees;
  std::vector<double> raw(n, 0.0), grad(n), hess(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (int t = 0; t < config.trees; ++t) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (auto [w, l] : pairs) {
      double rho = sigmoid(-(raw[w] - raw[l]));
      grad[w] -= rho;
      grad[l] += rho;
      double h = rho * (1.0 - rho);
      hess[w] += h;
      hess[l] += h;
    }
    detail::TreeBuilder builder{corpus, grad, hess, config, {}};
    builder.build(all, 0);
    for (std::size_t i = 0; i < n; ++i) raw[i] += builder.tree.predict(corpus[i].features);
    trees.push_back(std::move(builder.tree));
  }
  return std::make_shared<GbrtScorer>(std::move(trees), config);
}

// Fraction of differently-graded pairs ordered correctly; ties count half.
// Returns 1 when the corpus has no such pairs.
inline double pairwise_accuracy(const ScorerModel& model,
                                const std::vector<LabeledExample>& corpus) {
  std::vector<double> s;
  s.reserve(corpus.size());
  for (const LabeledExample& e : corpus) s.push_back(model.score(e.features));
  double correct = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (corpus[i].grade <= corpus[j].grade) continue;
      ++total;
      if (s[i] > s[j]) {
        correct += 1.0;
      } else if (s[i] == s[j]) {
        correct += 0.5;
      }
    }
  }
  return total == 0 ? 1.0 : correct / static_cast<double>(total);
}

}  // namespace vizrec
