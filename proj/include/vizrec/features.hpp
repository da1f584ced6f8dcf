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

// Fixed-length feature vector describing an executed chart. The layout is
// part of the model file contract; see docs/formats.md for the table.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vizrec/cell.hpp"
#include "vizrec/chart.hpp"
#include "vizrec/query.hpp"
#include "vizrec/table.hpp"

namespace vizrec {

inline constexpr std::size_t kFeatureCount = 14;

using FeatureVector = std::array<double, kFeatureCount>;

enum FeatureIndex : std::size_t {
  kFeatXType = 0,
  kFeatYType,
  kFeatChartType,
  kFeatAggregate,
  kFeatRowCount,
  kFeatXDistinct,
  kFeatYDistinct,
  kFeatXUniqueRatio,
  kFeatYUniqueRatio,
  kFeatXMin,
  kFeatXMax,
  kFeatYMin,
  kFeatYMax,
  kFeatCorrelation,
};

// Counts are log-scaled against the ingest row cap so that features do not
// depend on the corpus they were computed from.
inline constexpr double kCountScale = 1'000'000.0;

inline double log_scaled_count(double n) {
  double v = std::log1p(n) / std::log1p(kCountScale);
  return std::min(1.0, std::max(0.0, v));
}

// Inverse of log_scaled_count, used by the heuristic scorer to recover
// category counts.
inline double unscale_count(double f) { return std::expm1(f * std::log1p(kCountScale)); }

inline double type_ordinal(SemanticType t) {
  switch (t) {
    case SemanticType::kCategorical: return 0.0;
    case SemanticType::kNumeric: return 0.5;
    case SemanticType::kTemporal: return 1.0;
  }
  return 0.0;
}

inline double mark_ordinal(Mark m) { return static_cast<double>(static_cast<int>(m)) / 3.0; }

inline double aggregate_ordinal(Aggregate a) {
  return static_cast<double>(static_cast<int>(a)) / 3.0;
}

namespace detail {

inline std::optional<double> ordered_value(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return *d;
  if (const Timestamp* t = std::get_if<Timestamp>(&c)) {
    return static_cast<double>(t->seconds);
  }
  return std::nullopt;
}

// Pearson correlation; 0 when undefined.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  double r = sxy / std::sqrt(sxx * syy);
  return std::min(1.0, std::max(-1.0, r));
}

}  // namespace detail

// Pure function of (query, table, data). `data` must come from executing
// `query` over `table`.
inline FeatureVector extract_features(const VisQuery& query, const Table& table,
                                      const ChartData& data) {
  FeatureVector f{};
  const std::size_t xi = detail::require_field(table, query.encoding.x_field);
  const std::size_t yi = detail::require_field(table, query.encoding.y_field);
  const Column& xc = table.column(xi);
  const SemanticType xt = xc.semantic_type;
  const SemanticType yt = table.type_of(yi);

  f[kFeatXType] = type_ordinal(xt);
  f[kFeatYType] = type_ordinal(yt);
  f[kFeatChartType] = mark_ordinal(query.mark);
  f[kFeatAggregate] = aggregate_ordinal(query.encoding.aggregate);
  f[kFeatRowCount] = log_scaled_count(static_cast<double>(table.row_count()));

  std::vector<std::uint64_t> ys;
  ys.reserve(data.points.size());
  for (const ChartPoint& p : data.points) ys.push_back(double_key(p.y));
  const double x_distinct = static_cast<double>(distinct_x_count(data.points));
  const double y_distinct = static_cast<double>(count_distinct(ys));
  const double n = static_cast<double>(data.points.size());
  f[kFeatXDistinct] = log_scaled_count(x_distinct);
  f[kFeatYDistinct] = log_scaled_count(y_distinct);
  f[kFeatXUniqueRatio] = n > 0 ? x_distinct / n : 0.0;
  f[kFeatYUniqueRatio] = n > 0 ? y_distinct / n : 0.0;

  // x extremes: position within the source column's range, numeric x only.
  if (xt == SemanticType::kNumeric && xc.stats.min && xc.stats.max && !data.points.empty()) {
    double lo = std::get<double>(*xc.stats.min);
    double hi = std::get<double>(*xc.stats.max);
    double range = hi - lo;
    double cmin = 0.0, cmax = 0.0;
    bool any = false;
    for (const ChartPoint& p : data.points) {
      if (auto v = detail::ordered_value(p.x)) {
        cmin = any ? std::min(cmin, *v) : *v;
        cmax = any ? std::max(cmax, *v) : *v;
        any = true;
      }
    }
    if (any && range > 0.0) {
      auto norm = [&](double v) { return std::min(1.0, std::max(0.0, (v - lo) / range)); };
      f[kFeatXMin] = norm(cmin);
      f[kFeatXMax] = norm(cmax);
    }
  }

  // y extremes: relative to the chart's own largest magnitude, so aggregated
  // values (which leave the column range) stay comparable and keep their sign.
  if (!data.points.empty()) {
    double ymin = data.points.front().y, ymax = ymin;
    for (const ChartPoint& p : data.points) {
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    double scale = std::max(std::abs(ymin), std::abs(ymax));
    if (scale > 0.0) {
      f[kFeatYMin] = ymin / scale;
      f[kFeatYMax] = ymax / scale;
    }
  }

  if (xt != SemanticType::kCategorical) {
    std::vector<double> px, py;
    px.reserve(data.points.size());
    py.reserve(data.points.size());
    for (const ChartPoint& p : data.points) {
      if (auto v = detail::ordered_value(p.x)) {
        px.push_back(*v);
        py.push_back(p.y);
      }
    }
    f[kFeatCorrelation] = detail::pearson(px, py);
  }
  return f;
}

}  // namespace vizrec
