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
#include <map>
#include <random>
#include <set>
#include <unordered_set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vizrec/chart.hpp"
#include "vizrec/query.hpp"

namespace vizrec {
namespace {

using testing_util::flights;

VisQuery q(std::string_view text) { return parse_canonical_text(text); }

TEST(CanonicalText, FigureQueryForm) {
  VisQuery v;
  v.mark = Mark::kBar;
  v.encoding = {"City", "Delay", Aggregate::kAvg, std::nullopt};
  v.transform.group_field = "City";
  EXPECT_EQ(to_canonical_text(v), "mark bar encoding x City y AVG(Delay) transform group City");
  v.encoding.aggregate = Aggregate::kNone;
  v.transform.group_field.reset();
  EXPECT_EQ(to_canonical_text(v), "mark bar encoding x City y Delay transform");
}

TEST(CanonicalText, FullClauseOrder) {
  VisQuery v;
  v.mark = Mark::kLine;
  v.encoding = {"Date", "Delay", Aggregate::kSum, std::string("City")};
  v.transform.filter = Filter{"Delay", CompareOp::kGe, 5.0};
  v.transform.bin = Bin{"Date", BinGranularity::kMonth, 0.0};
  v.transform.group_field = "City";
  v.transform.sort = Sort{SortAxis::kY, SortOrder::kDesc};
  v.transform.topk = 3;
  EXPECT_EQ(to_canonical_text(v),
            "mark line encoding x Date y SUM(Delay) color City transform filter Delay >= 5 "
            "bin Date by month group City sort y desc topk 3");
  EXPECT_EQ(parse_canonical_text(to_canonical_text(v)), v);
}

TEST(CanonicalText, ParsesPieExample) {
  VisQuery v = q("mark pie encoding x City y SUM(Delay) transform group City");
  EXPECT_EQ(v.mark, Mark::kPie);
  EXPECT_EQ(v.encoding.x_field, "City");
  EXPECT_EQ(v.encoding.aggregate, Aggregate::kSum);
  EXPECT_EQ(v.transform.group_field, "City");
  // Keywords are case-insensitive on input, lower-case on output.
  EXPECT_EQ(q("mark Bar encoding x City y AVG(Delay) transform group City").mark, Mark::kBar);
}

TEST(CanonicalText, ParseErrors) {
  try {
    q("mark donut encoding x City y Delay transform");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.token(), 2u);
    EXPECT_EQ(e.offset(), 5u);
  }
  try {
    q("");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(q("mark bar encoding x City y NONE(Delay) transform"), ParseError);
  EXPECT_THROW(q("mark bar encoding x City y Delay transform topk 0 sort y desc"), ParseError);
  EXPECT_THROW(q("mark bar encoding x City y Delay transform group"), ParseError);
  EXPECT_THROW(q("mark bar encoding x City y Delay transform trailing"), ParseError);
}

TEST(CanonicalText, QuotedFieldsAndLiterals) {
  VisQuery v;
  v.mark = Mark::kScatter;
  v.encoding = {"Unit Price", "a\"b\\c", Aggregate::kNone, std::nullopt};
  v.transform.filter = Filter{"@when", CompareOp::kLt, Timestamp{86400}};
  std::string text = to_canonical_text(v);
  EXPECT_EQ(text,
            "mark scatter encoding x \"Unit Price\" y \"a\\\"b\\\\c\" transform filter \"@when\" < "
            "@1970-01-02");
  EXPECT_EQ(parse_canonical_text(text), v);
  v.transform.filter = Filter{"City", CompareOp::kNe, std::string("New York")};
  EXPECT_EQ(parse_canonical_text(to_canonical_text(v)), v);
}

TEST(CanonicalTextProperty, RoundTripOnRandomQueries) {
  // Awkward names exercise quoting.
  Table t = parse_table(
      "\"Unit Price\",\"(p)\",@x,plain,\"q\"\"t\"\n"
      "1,a,2012-01-01,z,3\n2,b,2012-02-01,y,4\n3,c,2012-03-01,x,5\n");
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    VisQuery v = testing_util::random_query(t, rng);
    std::string text = to_canonical_text(v);
    EXPECT_EQ(parse_canonical_text(text), v) << text;
  }
  for (int i = 0; i < 1000; ++i) {
    VisQuery v = testing_util::random_query(flights(), rng);
    EXPECT_EQ(parse_canonical_text(to_canonical_text(v)), v);
  }
}

TEST(Execute, AverageDelayPerCityMatchesHandOracle) {
  ChartData d = execute(q("mark bar encoding x City y AVG(Delay) transform group City"), flights());
  // LA: 5,3,7; MSP: 30,25,40; NYC: 12,18.
  std::map<std::string, double> want = {{"LA", 5.0}, {"MSP", 95.0 / 3.0}, {"NYC", 15.0}};
  ASSERT_EQ(d.points.size(), 3u);
  for (const ChartPoint& p : d.points) {
    EXPECT_NEAR(p.y, want.at(std::get<std::string>(p.x)), 1e-12);
  }
  EXPECT_EQ(d.y_label, "AVG(Delay)");
  EXPECT_EQ(d.x_label, "City");
  EXPECT_FALSE(d.legend.has_value());
}

TEST(Execute, ScatterIdentity) {
  ChartData d = execute(q("mark scatter encoding x Delay y Delay transform"), flights());
  ASSERT_EQ(d.points.size(), flights().row_count());
  for (std::size_t r = 0; r < d.points.size(); ++r) {
    EXPECT_EQ(std::get<double>(d.points[r].x), d.points[r].y);
    EXPECT_EQ(d.points[r].y, std::get<double>(flights().cell(r, 1)));
  }
}

TEST(Execute, Errors) {
  auto kind = [](const std::string& text) {
    try {
      execute(parse_canonical_text(text), flights());
    } catch (const ExecError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no ExecError for " << text;
    return ExecError::Kind::UnknownField;
  };
  EXPECT_EQ(kind("mark bar encoding x City y COUNT(Delay) transform filter Delay > 1000 group City"),
            ExecError::Kind::EmptyResult);
  EXPECT_EQ(kind("mark bar encoding x Nope y COUNT(Delay) transform group Nope"),
            ExecError::Kind::UnknownField);
  EXPECT_EQ(kind("mark bar encoding x City y SUM(City) transform group City"),
            ExecError::Kind::TypeMismatch);
  EXPECT_EQ(kind("mark line encoding x Date y AVG(Date) transform group Date"),
            ExecError::Kind::TypeMismatch);
  EXPECT_EQ(kind("mark bar encoding x City y Delay transform bin City by month"),
            ExecError::Kind::TypeMismatch);
}

TEST(Execute, CountIgnoresYValuesButKeepsLabel) {
  ChartData d = execute(q("mark bar encoding x City y COUNT(Date) transform group City"), flights());
  EXPECT_EQ(d.y_label, "COUNT(Date)");
  double total = 0;
  for (const ChartPoint& p : d.points) total += p.y;
  EXPECT_EQ(total, 8.0);
}

TEST(Execute, TopkAfterSortGivesExactlyN) {
  ChartData d = execute(
      q("mark bar encoding x Date y SUM(Delay) transform group Date sort y desc topk 3"), flights());
  ASSERT_EQ(d.points.size(), 3u);
  EXPECT_EQ(d.points[0].y, 40.0);
  EXPECT_EQ(d.points[1].y, 30.0);
  EXPECT_EQ(d.points[2].y, 25.0);
}

TEST(Execute, CalendarAndBucketBins) {
  ChartData w = execute(
      q("mark bar encoding x Date y COUNT(Delay) transform bin Date by weekday group Date"),
      flights());
  // 2012-01-01 was a Sunday; eight consecutive days cover each weekday once,
  // Sunday twice.
  ASSERT_EQ(w.points.size(), 7u);
  EXPECT_EQ(std::get<std::string>(w.points[0].x), "Sun");
  EXPECT_EQ(w.points[0].y, 2.0);

  ChartData b = execute(
      q("mark bar encoding x Delay y COUNT(Delay) transform bin Delay by bucket(10) group Delay"),
      flights());
  std::map<double, double> want = {{0, 3}, {10, 2}, {20, 1}, {30, 1}, {40, 1}};
  ASSERT_EQ(b.points.size(), want.size());
  for (const ChartPoint& p : b.points) EXPECT_EQ(p.y, want.at(std::get<double>(p.x)));
}

TEST(Execute, SeriesFromColorOrSecondaryGroup) {
  ChartData d = execute(
      q("mark line encoding x Date y AVG(Delay) transform group City"), flights());
  ASSERT_TRUE(d.legend.has_value());
  EXPECT_EQ(d.legend->size(), 3u);
  EXPECT_EQ(d.color_label, "City");
}

TEST(Execute, NullsAreDroppedAndAllNullGroupsVanish) {
  Table t = parse_table("k,v\na,1\na,\nb,NA\nc,3\n");
  ChartData d = execute(q("mark bar encoding x k y AVG(v) transform group k"), t);
  ASSERT_EQ(d.points.size(), 2u);
  EXPECT_EQ(std::get<std::string>(d.points[0].x), "a");
  EXPECT_EQ(d.points[0].y, 1.0);
  EXPECT_EQ(std::get<std::string>(d.points[1].x), "c");
}

// Independent brute-force evaluator: row loops with linear group lookup.
std::vector<ChartPoint> oracle(const VisQuery& v, const Table& t) {
  auto col = [&](const std::string& n) { return *t.find_column(n); };
  const std::size_t xc = col(v.encoding.x_field), yc = col(v.encoding.y_field);
  std::optional<std::size_t> sc;
  if (v.encoding.color_field) sc = col(*v.encoding.color_field);
  if (v.transform.group_field && col(*v.transform.group_field) != xc) {
    sc = col(*v.transform.group_field);
  }
  struct G {
    Cell x;
    std::string s;
    std::vector<double> ys;
    std::size_t rows = 0;
  };
  std::vector<G> groups;
  std::vector<ChartPoint> raw;
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    if (const auto& f = v.transform.filter) {
      const Cell& c = t.cell(r, col(f->field));
      if (is_null(c)) continue;
      bool keep = false;
      switch (f->op) {
        case CompareOp::kEq: keep = c == f->literal; break;
        case CompareOp::kNe: keep = !(c == f->literal); break;
        case CompareOp::kLt: keep = c < f->literal; break;
        case CompareOp::kLe: keep = !(f->literal < c); break;
        case CompareOp::kGt: keep = f->literal < c; break;
        case CompareOp::kGe: keep = !(c < f->literal); break;
      }
      if (!keep) continue;
    }
    Cell x = t.cell(r, xc);
    if (is_null(x)) continue;
    if (const auto& b = v.transform.bin) {
      if (b->granularity == BinGranularity::kBucket) {
        x = b->width * std::floor(std::get<double>(x) / b->width);
      } else {
        CivilTime ct = to_civil(std::get<Timestamp>(x));
        if (b->granularity == BinGranularity::kYear) {
          x = Timestamp{days_from_civil(ct.year, 1, 1) * 86400};
        } else if (b->granularity == BinGranularity::kMonth) {
          x = Timestamp{days_from_civil(ct.year, ct.month, 1) * 86400};
        } else {
          const char* names[] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
          x = std::string(names[ct.weekday]);
        }
      }
    }
    std::string s;
    if (sc) {
      if (is_null(t.cell(r, *sc))) continue;
      s = cell_to_string(t.cell(r, *sc));
    }
    const Cell& y = t.cell(r, yc);
    if (v.encoding.aggregate == Aggregate::kNone) {
      if (!is_null(y)) raw.push_back({x, std::get<double>(y), s});
      continue;
    }
    if (v.encoding.aggregate != Aggregate::kCount && is_null(y)) continue;
    G* g = nullptr;
    for (G& cand : groups) {
      if (cand.x == x && cand.s == s) g = &cand;
    }
    if (!g) {
      groups.push_back({x, s, {}, 0});
      g = &groups.back();
    }
    ++g->rows;
    if (!is_null(y) && v.encoding.aggregate != Aggregate::kCount) g->ys.push_back(std::get<double>(y));
  }
  std::vector<ChartPoint> pts = raw;
  for (const G& g : groups) {
    double sum = 0;
    for (double y : g.ys) sum += y;
    double val = v.encoding.aggregate == Aggregate::kCount ? static_cast<double>(g.rows)
                 : v.encoding.aggregate == Aggregate::kSum ? sum
                                                           : sum / static_cast<double>(g.ys.size());
    pts.push_back({g.x, val, g.s});
  }
  if (const auto& so = v.transform.sort) {
    // Insertion sort is stable by construction.
    for (std::size_t i = 1; i < pts.size(); ++i) {
      for (std::size_t j = i; j > 0; --j) {
        const ChartPoint& a = pts[j];
        const ChartPoint& b = pts[j - 1];
        bool before = so->by == SortAxis::kX
                          ? (so->order == SortOrder::kAsc ? a.x < b.x : b.x < a.x)
                          : (so->order == SortOrder::kAsc ? a.y < b.y : b.y < a.y);
        if (!before) break;
        std::swap(pts[j], pts[j - 1]);
      }
    }
  }
  if (v.transform.topk && pts.size() > static_cast<std::size_t>(*v.transform.topk)) {
    pts.resize(static_cast<std::size_t>(*v.transform.topk));
  }
  return pts;
}

TEST(ExecuteProperty, MatchesBruteForceOracleAndIsDeterministic) {
  std::mt19937_64 rng(5);
  std::vector<Table> tables = {flights(), testing_util::sales(), testing_util::synthetic(6, 100, 3)};
  int checked = 0, empty = 0;
  for (int i = 0; i < 3000; ++i) {
    const Table& t = tables[static_cast<std::size_t>(i) % tables.size()];
    VisQuery v = testing_util::random_query(t, rng);
    ChartData d;
    try {
      d = execute(v, t);
    } catch (const ExecError& e) {
      if (e.kind() == ExecError::Kind::EmptyResult) {
        EXPECT_TRUE(oracle(v, t).empty()) << to_canonical_text(v);
        ++empty;
      }
      continue;
    }
    ++checked;
    std::vector<ChartPoint> want = oracle(v, t);
    ASSERT_EQ(d.points.size(), want.size()) << to_canonical_text(v);
    for (std::size_t k = 0; k < want.size(); ++k) {
      EXPECT_EQ(d.points[k].x, want[k].x) << to_canonical_text(v);
      EXPECT_EQ(d.points[k].series, want[k].series);
      EXPECT_NEAR(d.points[k].y, want[k].y, 1e-9 * std::max(1.0, std::abs(want[k].y)))
          << to_canonical_text(v);
      EXPECT_TRUE(std::isfinite(d.points[k].y));
    }
    EXPECT_EQ(execute(v, t), d);
    if (d.legend) {
      std::set<std::string> names;
      for (const ChartPoint& p : want) names.insert(p.series);
      EXPECT_EQ(*d.legend, std::vector<std::string>(names.begin(), names.end()));
    }
  }
  EXPECT_GT(checked, 1000);
  EXPECT_GT(empty, 0);
}

TEST(DistinctCount, AgreesWithHashSet) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ChartPoint> pts;
    std::vector<std::uint64_t> keys;
    std::unordered_set<Cell, CellHash> xs;
    std::unordered_set<double> ys;
    const int n = static_cast<int>(rng() % 300);
    const int kind = trial % 3;
    for (int i = 0; i < n; ++i) {
      Cell x;
      std::int64_t v = static_cast<std::int64_t>(rng() % 40) - 20;
      if (kind == 0) x = static_cast<double>(v) * 0.5;
      if (kind == 1) x = Timestamp{v};  // includes -1, the empty-slot pattern
      if (kind == 2) x = "k" + std::to_string(v);
      double y = i % 7 == 0 ? -0.0 : static_cast<double>(rng() % 50);
      pts.push_back({x, y, ""});
      xs.insert(x);
      ys.insert(y);
      keys.push_back(double_key(y));
    }
    EXPECT_EQ(distinct_x_count(pts), xs.size());
    EXPECT_EQ(count_distinct(keys), ys.size());
  }
  EXPECT_EQ(count_distinct({~std::uint64_t{0}, ~std::uint64_t{0}, 3}), 2u);
}

TEST(ChartSpec, BarMapsDirectly) {
  ChartData d = execute(q("mark bar encoding x City y AVG(Delay) transform group City"), flights());
  nlohmann::json s = to_chart_spec(d);
  EXPECT_EQ(s["spec_version"], 1);
  EXPECT_EQ(s["mark"], "bar");
  EXPECT_EQ(s["data"].size(), 3u);
  EXPECT_EQ(s["encoding"]["x"]["field"], "City");
  EXPECT_EQ(s["encoding"]["x"]["type"], "categorical");
  EXPECT_EQ(s["encoding"]["y"]["field"], "Delay");
  EXPECT_EQ(s["encoding"]["y"]["title"], "AVG(Delay)");
  EXPECT_EQ(s["encoding"]["y"]["aggregate"], "AVG");
  EXPECT_EQ(to_vega_lite(s)["encoding"]["y"]["title"], "AVG(Delay)");
  EXPECT_FALSE(s["encoding"].contains("color"));
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    EXPECT_EQ(s["data"][i]["x"], std::get<std::string>(d.points[i].x));
    EXPECT_EQ(s["data"][i]["y"].get<double>(), d.points[i].y);
  }
}

TEST(ChartSpec, PieSharesNormalize) {
  ChartData d = execute(q("mark pie encoding x City y SUM(Delay) transform group City"), flights());
  nlohmann::json s = to_chart_spec(d);
  double total = 0;
  for (const ChartPoint& p : d.points) total += p.y;
  EXPECT_EQ(total, 140.0);
  double share_sum = 0;
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    EXPECT_NEAR(s["data"][i]["share"].get<double>(), d.points[i].y / 140.0, 1e-15);
    share_sum += s["data"][i]["share"].get<double>();
  }
  EXPECT_NEAR(share_sum, 1.0, 1e-12);
  EXPECT_EQ(to_vega_lite(s)["mark"], "arc");
}

TEST(ChartSpec, ColorSeriesLegend) {
  Table t = parse_table("d,v,s\n2012-01-01,1,a\n2012-01-02,2,b\n2012-01-03,3,a\n");
  ChartData d = execute(q("mark line encoding x d y v color s transform"), t);
  nlohmann::json s = to_chart_spec(d);
  ASSERT_TRUE(s["encoding"].contains("color"));
  EXPECT_EQ(s["encoding"]["color"]["legend"], nlohmann::json({"a", "b"}));
  EXPECT_EQ(s["data"][1]["c"], "b");
  EXPECT_EQ(s["encoding"]["x"]["type"], "temporal");
  EXPECT_EQ(s["data"][0]["x"], "2012-01-01");
  nlohmann::json vl = to_vega_lite(s);
  EXPECT_EQ(vl["encoding"]["color"]["field"], "c");
  EXPECT_EQ(vl["encoding"]["x"]["type"], "temporal");
}

}  // namespace
}  // namespace vizrec
