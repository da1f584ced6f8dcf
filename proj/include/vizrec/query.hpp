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

// Visualization queries: mark, encoding and transform clauses, plus the
// canonical one-line text form
//
//   mark <kind> encoding x <f> y <AGG(f)|f> [color <f>]
//   transform [filter <f> <op> <lit>] [bin <f> by <g>] [group <f>]
//             [sort <axis> <ord>] [topk <n>]

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vizrec/cell.hpp"
#include "vizrec/error.hpp"

namespace vizrec {

enum class Mark { kBar, kLine, kPie, kScatter };
inline constexpr std::array<Mark, 4> kAllMarks = {Mark::kBar, Mark::kLine,
                                                  Mark::kPie, Mark::kScatter};

enum class Aggregate { kNone, kCount, kSum, kAvg };
inline constexpr std::array<Aggregate, 4> kAllAggregates = {
    Aggregate::kNone, Aggregate::kCount, Aggregate::kSum, Aggregate::kAvg};

inline std::string_view to_string(Mark m) {
  switch (m) {
    case Mark::kBar: return "bar";
    case Mark::kLine: return "line";
    case Mark::kPie: return "pie";
    case Mark::kScatter: return "scatter";
  }
  return "bar";
}

inline std::string_view to_string(Aggregate a) {
  switch (a) {
    case Aggregate::kNone: return "NONE";
    case Aggregate::kCount: return "COUNT";
    case Aggregate::kSum: return "SUM";
    case Aggregate::kAvg: return "AVG";
  }
  return "NONE";
}

namespace detail {
inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}
}  // namespace detail

inline std::optional<Mark> mark_from_string(std::string_view s) {
  std::string l = detail::lower(s);
  for (Mark m : kAllMarks) {
    if (l == to_string(m)) return m;
  }
  return std::nullopt;
}

inline std::optional<Aggregate> aggregate_from_string(std::string_view s) {
  std::string l = detail::lower(s);
  for (Aggregate a : kAllAggregates) {
    if (l == detail::lower(to_string(a))) return a;
  }
  return std::nullopt;
}

enum class BinGranularity { kYear, kMonth, kWeekday, kBucket };

struct Bin {
  std::string field;
  BinGranularity granularity = BinGranularity::kYear;
  double width = 0.0;  // bucket width; only meaningful for kBucket

  friend bool operator==(const Bin&, const Bin&) = default;
};

enum class SortAxis { kX, kY };
enum class SortOrder { kAsc, kDesc };

struct Sort {
  SortAxis by = SortAxis::kY;
  SortOrder order = SortOrder::kDesc;

  friend bool operator==(const Sort&, const Sort&) = default;
};

enum class CompareOp { kEq, kNe, kLt, kLe, kGt, kGe };

inline std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::kEq: return "=";
    case CompareOp::kNe: return "!=";
    case CompareOp::kLt: return "<";
    case CompareOp::kLe: return "<=";
    case CompareOp::kGt: return ">";
    case CompareOp::kGe: return ">=";
  }
  return "=";
}

struct Filter {
  std::string field;
  CompareOp op = CompareOp::kEq;
  Cell literal;

  friend bool operator==(const Filter&, const Filter&) = default;
};

struct Encoding {
  std::string x_field;
  std::string y_field;
  Aggregate aggregate = Aggregate::kNone;
  std::optional<std::string> color_field;

  friend bool operator==(const Encoding&, const Encoding&) = default;
};

struct Transform {
  std::optional<std::string> group_field;
  std::optional<Bin> bin;
  std::optional<Sort> sort;
  std::optional<std::int64_t> topk;
  std::optional<Filter> filter;

  friend bool operator==(const Transform&, const Transform&) = default;
};

struct VisQuery {
  Mark mark = Mark::kBar;
  Encoding encoding;
  Transform transform;

  friend bool operator==(const VisQuery&, const VisQuery&) = default;
};

// ---------------------------------------------------------------------------
// Canonical text.

namespace detail {

inline bool needs_quotes(std::string_view field) {
  if (field.empty()) return true;
  if (field.front() == '@') return true;
  for (char ch : field) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '(' || ch == ')' ||
        ch == '"' || ch == '\\') {
      return true;
    }
  }
  return false;
}

inline std::string quote_text(std::string_view s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

inline std::string field_token(std::string_view field) {
  return needs_quotes(field) ? quote_text(field) : std::string(field);
}

inline std::string literal_token(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_number(*d);
  if (const Timestamp* t = std::get_if<Timestamp>(&c)) {
    return "@" + format_timestamp(*t);
  }
  if (const std::string* s = std::get_if<std::string>(&c)) return quote_text(*s);
  return "null";
}

inline std::string_view to_string(BinGranularity g) {
  switch (g) {
    case BinGranularity::kYear: return "year";
    case BinGranularity::kMonth: return "month";
    case BinGranularity::kWeekday: return "weekday";
    case BinGranularity::kBucket: return "bucket";
  }
  return "year";
}

}  // namespace detail

inline std::string to_canonical_text(const VisQuery& q) {
  std::string out = "mark ";
  out += to_string(q.mark);
  out += " encoding x ";
  out += detail::field_token(q.encoding.x_field);
  out += " y ";
  if (q.encoding.aggregate == Aggregate::kNone) {
    out += detail::field_token(q.encoding.y_field);
  } else {
    out += to_string(q.encoding.aggregate);
    out += "(";
    out += detail::field_token(q.encoding.y_field);
    out += ")";
  }
  if (q.encoding.color_field) {
    out += " color ";
    out += detail::field_token(*q.encoding.color_field);
  }
  out += " transform";
  const Transform& t = q.transform;
  if (t.filter) {
    out += " filter ";
    out += detail::field_token(t.filter->field);
    out += " ";
    out += to_string(t.filter->op);
    out += " ";
    out += detail::literal_token(t.filter->literal);
  }
  if (t.bin) {
    out += " bin ";
    out += detail::field_token(t.bin->field);
    out += " by ";
    out += detail::to_string(t.bin->granularity);
    if (t.bin->granularity == BinGranularity::kBucket) {
      out += "(" + format_number(t.bin->width) + ")";
    }
  }
  if (t.group_field) {
    out += " group ";
    out += detail::field_token(*t.group_field);
  }
  if (t.sort) {
    out += " sort ";
    out += t.sort->by == SortAxis::kX ? "x" : "y";
    out += t.sort->order == SortOrder::kAsc ? " asc" : " desc";
  }
  if (t.topk) {
    out += " topk ";
    out += std::to_string(*t.topk);
  }
  return out;
}

namespace detail {

struct Token {
  enum class Kind { kWord, kQuoted, kLParen, kRParen, kEnd };
  Kind kind = Kind::kEnd;
  std::string text;
  std::size_t offset = 0;
};

class QueryParser {
 public:
  explicit QueryParser(std::string_view text) : text_(text) { tokenize(); }

  VisQuery parse() {
    VisQuery q;
    keyword("mark");
    {
      const Token& t = expect_word("a mark kind (bar, line, pie, scatter)");
      auto m = mark_from_string(t.text);
      if (!m) fail(t, "a mark kind (bar, line, pie, scatter)");
      q.mark = *m;
      advance();
    }
    keyword("encoding");
    keyword("x");
    q.encoding.x_field = field("an x field");
    keyword("y");
    {
      // Either a bare field or AGG(field).
      const Token& t = peek();
      if ((t.kind == Token::Kind::kWord) && peek(1).kind == Token::Kind::kLParen) {
        auto agg = aggregate_from_string(t.text);
        if (!agg || *agg == Aggregate::kNone) fail(t, "COUNT, SUM or AVG");
        advance();
        advance();  // (
        q.encoding.aggregate = *agg;
        q.encoding.y_field = field("a y field");
        if (peek().kind != Token::Kind::kRParen) fail(peek(), "')'");
        advance();
      } else {
        q.encoding.y_field = field("a y field");
      }
    }
    if (is_word("color")) {
      advance();
      q.encoding.color_field = field("a color field");
    }
    keyword("transform");
    Transform& tr = q.transform;
    if (is_word("filter")) {
      advance();
      Filter f;
      f.field = field("a filter field");
      const Token& op = expect_word("a comparison operator");
      if (op.text == "=") f.op = CompareOp::kEq;
      else if (op.text == "!=") f.op = CompareOp::kNe;
      else if (op.text == "<") f.op = CompareOp::kLt;
      else if (op.text == "<=") f.op = CompareOp::kLe;
      else if (op.text == ">") f.op = CompareOp::kGt;
      else if (op.text == ">=") f.op = CompareOp::kGe;
      else fail(op, "a comparison operator");
      advance();
      f.literal = literal();
      tr.filter = std::move(f);
    }
    if (is_word("bin")) {
      advance();
      Bin b;
      b.field = field("a bin field");
      keyword("by");
      const Token& g = expect_word("year, month, weekday or bucket(<width>)");
      if (g.text == "year") b.granularity = BinGranularity::kYear;
      else if (g.text == "month") b.granularity = BinGranularity::kMonth;
      else if (g.text == "weekday") b.granularity = BinGranularity::kWeekday;
      else if (g.text == "bucket") b.granularity = BinGranularity::kBucket;
      else fail(g, "year, month, weekday or bucket(<width>)");
      advance();
      if (b.granularity == BinGranularity::kBucket) {
        if (peek().kind != Token::Kind::kLParen) fail(peek(), "'('");
        advance();
        const Token& w = expect_word("a positive bucket width");
        auto width = parse_number(w.text);
        if (!width || *width <= 0.0) fail(w, "a positive bucket width");
        b.width = *width;
        advance();
        if (peek().kind != Token::Kind::kRParen) fail(peek(), "')'");
        advance();
      }
      tr.bin = std::move(b);
    }
    if (is_word("group")) {
      advance();
      tr.group_field = field("a group field");
    }
    if (is_word("sort")) {
      advance();
      Sort s;
      const Token& axis = expect_word("x or y");
      if (axis.text == "x") s.by = SortAxis::kX;
      else if (axis.text == "y") s.by = SortAxis::kY;
      else fail(axis, "x or y");
      advance();
      const Token& ord = expect_word("asc or desc");
      if (ord.text == "asc") s.order = SortOrder::kAsc;
      else if (ord.text == "desc") s.order = SortOrder::kDesc;
      else fail(ord, "asc or desc");
      advance();
      tr.sort = s;
    }
    if (is_word("topk")) {
      advance();
      const Token& n = expect_word("a positive integer");
      std::int64_t value = 0;
      auto [ptr, ec] = std::from_chars(n.text.data(), n.text.data() + n.text.size(), value);
      if (ec != std::errc() || ptr != n.text.data() + n.text.size() || value <= 0) {
        fail(n, "a positive integer");
      }
      tr.topk = value;
      advance();
    }
    if (peek().kind != Token::Kind::kEnd) fail(peek(), "end of query");
    return q;
  }

 private:
  void tokenize() {
    std::size_t i = 0;
    while (i < text_.size()) {
      char ch = text_[i];
      if (std::isspace(static_cast<unsigned char>(ch))) {
        ++i;
        continue;
      }
      Token t;
      t.offset = i;
      if (ch == '(') {
        t.kind = Token::Kind::kLParen;
        ++i;
      } else if (ch == ')') {
        t.kind = Token::Kind::kRParen;
        ++i;
      } else if (ch == '"') {
        t.kind = Token::Kind::kQuoted;
        ++i;
        bool closed = false;
        while (i < text_.size()) {
          char c = text_[i];
          if (c == '\\' && i + 1 < text_.size()) {
            t.text.push_back(text_[i + 1]);
            i += 2;
          } else if (c == '"') {
            ++i;
            closed = true;
            break;
          } else {
            t.text.push_back(c);
            ++i;
          }
        }
        if (!closed) {
          throw ParseError(t.offset, tokens_.size() + 1, "closing '\"'");
        }
      } else {
        t.kind = Token::Kind::kWord;
        while (i < text_.size() && !std::isspace(static_cast<unsigned char>(text_[i])) &&
               text_[i] != '(' && text_[i] != ')' && text_[i] != '"') {
          t.text.push_back(text_[i]);
          ++i;
        }
      }
      tokens_.push_back(std::move(t));
    }
    Token end;
    end.offset = text_.size();
    tokens_.push_back(end);
  }

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  void advance() {
    if (pos_ + 1 < tokens_.size()) ++pos_;
  }
  [[noreturn]] void fail(const Token& t, const std::string& expected) const {
    std::size_t index = static_cast<std::size_t>(&t - tokens_.data()) + 1;
    throw ParseError(t.offset, index, expected);
  }
  bool is_word(std::string_view w) const {
    return peek().kind == Token::Kind::kWord && detail::lower(peek().text) == w;
  }
  void keyword(std::string_view w) {
    if (!is_word(w)) fail(peek(), "'" + std::string(w) + "'");
    advance();
  }
  const Token& expect_word(const std::string& expected) {
    if (peek().kind != Token::Kind::kWord) fail(peek(), expected);
    return peek();
  }
  std::string field(const std::string& expected) {
    const Token& t = peek();
    if (t.kind != Token::Kind::kWord && t.kind != Token::Kind::kQuoted) {
      fail(t, expected);
    }
    std::string out = t.text;
    advance();
    return out;
  }
  Cell literal() {
    const Token& t = peek();
    if (t.kind == Token::Kind::kQuoted) {
      std::string s = t.text;
      advance();
      return s;
    }
    if (t.kind != Token::Kind::kWord) fail(t, "a literal");
    if (!t.text.empty() && t.text.front() == '@') {
      auto ts = parse_timestamp(std::string_view(t.text).substr(1));
      if (!ts) fail(t, "a timestamp literal");
      advance();
      return *ts;
    }
    auto num = parse_number(t.text);
    if (!num) fail(t, "a number, quoted string or @timestamp");
    advance();
    return *num;
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline VisQuery parse_canonical_text(std::string_view text) {
  return detail::QueryParser(text).parse();
}

// ---------------------------------------------------------------------------
// Search-space vocabulary: layers of the query graph and the concrete
// operations chosen at each layer.

enum class Layer : std::uint8_t {
  kRoot,
  kMark,
  kXField,
  kYField,
  kAggregate,
  kGroupField,
  // Optional extension layers; each has a skip option (value 0).
  kBin,
  kSort,
  kTopK,
  kFilter,
};

inline std::string_view to_string(Layer l) {
  switch (l) {
    case Layer::kRoot: return "root";
    case Layer::kMark: return "mark";
    case Layer::kXField: return "x_field";
    case Layer::kYField: return "y_field";
    case Layer::kAggregate: return "aggregate";
    case Layer::kGroupField: return "group_field";
    case Layer::kBin: return "bin";
    case Layer::kSort: return "sort";
    case Layer::kTopK: return "topk";
    case Layer::kFilter: return "filter";
  }
  return "root";
}

inline std::optional<Layer> layer_from_string(std::string_view s) {
  for (Layer l : {Layer::kMark, Layer::kXField, Layer::kYField, Layer::kAggregate,
                  Layer::kGroupField, Layer::kBin, Layer::kSort, Layer::kTopK,
                  Layer::kFilter}) {
    if (s == to_string(l)) return l;
  }
  return std::nullopt;
}

// Option indices of the extension layers. 0 always means "skip".
enum class BinOption : std::int32_t { kSkip, kYear, kMonth, kWeekday, kBucket };
enum class SortOption : std::int32_t { kSkip, kXAsc, kXDesc, kYAsc, kYDesc };

inline std::optional<Sort> sort_for(SortOption o) {
  switch (o) {
    case SortOption::kSkip: return std::nullopt;
    case SortOption::kXAsc: return Sort{SortAxis::kX, SortOrder::kAsc};
    case SortOption::kXDesc: return Sort{SortAxis::kX, SortOrder::kDesc};
    case SortOption::kYAsc: return Sort{SortAxis::kY, SortOrder::kAsc};
    case SortOption::kYDesc: return Sort{SortAxis::kY, SortOrder::kDesc};
  }
  return std::nullopt;
}

// One operation. `value` is interpreted per layer: a Mark or Aggregate
// ordinal, a column index, or an extension-option index (0 = skip).
struct Action {
  Layer layer = Layer::kRoot;
  std::int32_t value = 0;

  friend auto operator<=>(const Action&, const Action&) = default;
  friend bool operator==(const Action&, const Action&) = default;
};

// A prefix of a query under construction, clause per layer in canonical
// order. The group layer is skipped when the aggregate is NONE.
class PartialQuery {
 public:
  PartialQuery() = default;
  explicit PartialQuery(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  const std::vector<Layer>& layers() const { return layers_; }
  const std::vector<Action>& clauses() const { return clauses_; }
  std::size_t depth() const { return clauses_.size(); }

  std::optional<Action> get(Layer layer) const {
    for (const Action& a : clauses_) {
      if (a.layer == layer) return a;
    }
    return std::nullopt;
  }

  bool has_layer(Layer layer) const {
    for (Layer l : layers_) {
      if (l == layer) return true;
    }
    return false;
  }

  // True when the layer will never be filled on this path.
  bool skips(Layer layer) const {
    if (!has_layer(layer)) return true;
    if (layer == Layer::kGroupField) {
      auto agg = get(Layer::kAggregate);
      return agg && static_cast<Aggregate>(agg->value) == Aggregate::kNone;
    }
    return false;
  }

  std::optional<Layer> next_layer() const {
    for (Layer l : layers_) {
      if (get(l)) continue;
      if (skips(l)) continue;
      return l;
    }
    return std::nullopt;
  }

  bool complete() const { return !layers_.empty() && !next_layer().has_value(); }

  void push(Action a) { clauses_.push_back(a); }

  PartialQuery with(Action a) const {
    PartialQuery copy = *this;
    copy.push(a);
    return copy;
  }

  friend bool operator==(const PartialQuery&, const PartialQuery&) = default;

 private:
  std::vector<Layer> layers_;
  std::vector<Action> clauses_;
};

}  // namespace vizrec
