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

#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

namespace vizrec {

// Seconds since 1970-01-01T00:00:00 (UTC, no leap seconds).
struct Timestamp {
  std::int64_t seconds = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

struct Null {
  friend bool operator==(const Null&, const Null&) = default;
  friend auto operator<=>(const Null&, const Null&) = default;
};

// One table cell. The alternative order is also the cross-type sort order.
using Cell = std::variant<Null, double, std::string, Timestamp>;

inline bool is_null(const Cell& c) { return std::holds_alternative<Null>(c); }

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline bool parse_fixed_int(std::string_view s, std::size_t pos,
                            std::size_t width, int& out) {
  if (pos + width > s.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    char ch = s[i];
    if (ch < '0' || ch > '9') return false;
    value = value * 10 + (ch - '0');
  }
  out = value;
  return true;
}

}  // namespace detail

// Tokens treated as missing values on ingest.
inline bool is_null_token(std::string_view raw) {
  std::string_view s = detail::trim(raw);
  if (s.size() > 4) return false;
  return s.empty() || s == "NA" || s == "N/A" || s == "na" || s == "n/a" ||
         s == "null" || s == "NULL" || s == "Null" || s == "NaN" ||
         s == "nan" || s == "None";
}

// Parses a finite decimal number; surrounding whitespace and a leading '+'
// are accepted.
inline std::optional<double> parse_number(std::string_view raw) {
  std::string_view s = detail::trim(raw);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count();
}

// Accepts YYYY-MM-DD, YYYY/MM/DD, and ISO-8601 date-times
// YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM].
inline std::optional<Timestamp> parse_timestamp(std::string_view raw) {
  std::string_view s = detail::trim(raw);
  if (s.size() < 10) return std::nullopt;
  int y = 0, mo = 0, d = 0;
  if (!detail::parse_fixed_int(s, 0, 4, y)) return std::nullopt;
  char sep = s[4];
  if (sep != '-' && sep != '/') return std::nullopt;
  if (s[7] != sep) return std::nullopt;
  if (!detail::parse_fixed_int(s, 5, 2, mo) ||
      !detail::parse_fixed_int(s, 8, 2, d)) {
    return std::nullopt;
  }
  std::chrono::year_month_day ymd{std::chrono::year{y},
                                  std::chrono::month{static_cast<unsigned>(mo)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t seconds =
      days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) *
      86400;
  if (s.size() == 10) return Timestamp{seconds};
  // Slash dates are date-only.
  if (sep == '/') return std::nullopt;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!detail::parse_fixed_int(s, 11, 2, hh) || s.size() < 16 ||
      s[13] != ':' || !detail::parse_fixed_int(s, 14, 2, mm)) {
    return std::nullopt;
  }
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (!detail::parse_fixed_int(s, pos + 1, 2, ss)) return std::nullopt;
    pos += 3;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      std::size_t digits = 0;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
        ++pos;
        ++digits;
      }
      if (digits == 0) return std::nullopt;
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      pos += 1;
    } else if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 &&
               s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!detail::parse_fixed_int(s, pos + 1, 2, oh) ||
          !detail::parse_fixed_int(s, pos + 4, 2, om)) {
        return std::nullopt;
      }
      offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  return Timestamp{seconds + hh * 3600 + mm * 60 + ss - offset_minutes * 60};
}

struct CivilTime {
  int year;
  unsigned month;
  unsigned day;
  int hour;
  int minute;
  int second;
  unsigned weekday;  // 0 = Monday
};

inline CivilTime to_civil(Timestamp t) {
  using namespace std::chrono;
  std::int64_t days = t.seconds >= 0 ? t.seconds / 86400
                                     : -((-t.seconds + 86399) / 86400);
  std::int64_t rem = t.seconds - days * 86400;
  sys_days sd{std::chrono::days{days}};
  year_month_day ymd{sd};
  weekday wd{sd};
  return CivilTime{static_cast<int>(ymd.year()),
                   static_cast<unsigned>(ymd.month()),
                   static_cast<unsigned>(ymd.day()),
                   static_cast<int>(rem / 3600),
                   static_cast<int>((rem % 3600) / 60),
                   static_cast<int>(rem % 60),
                   wd.iso_encoding() - 1};
}

// Date-only form when the time of day is midnight, otherwise
// YYYY-MM-DDTHH:MM:SS.
inline std::string format_timestamp(Timestamp t) {
  CivilTime c = to_civil(t);
  char buf[32];
  if (c.hour == 0 && c.minute == 0 && c.second == 0) {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d", c.year,
                  c.month, c.day, c.hour, c.minute, c.second);
  }
  return buf;
}

// Shortest decimal representation that round-trips.
inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

inline std::string cell_to_string(const Cell& c) {
  struct Visitor {
    std::string operator()(const Null&) const { return ""; }
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(Timestamp t) const { return format_timestamp(t); }
  };
  return std::visit(Visitor{}, c);
}

// Numeric view of a cell: numbers as-is, timestamps as seconds.
inline std::optional<double> cell_as_number(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return *d;
  if (const Timestamp* t = std::get_if<Timestamp>(&c)) {
    return static_cast<double>(t->seconds);
  }
  return std::nullopt;
}

struct CellHash {
  std::size_t operator()(const Cell& c) const {
    std::size_t h = std::hash<std::size_t>{}(c.index());
    struct Visitor {
      std::size_t operator()(const Null&) const { return 0; }
      std::size_t operator()(double v) const {
        return std::hash<double>{}(v == 0.0 ? 0.0 : v);
      }
      std::size_t operator()(const std::string& s) const {
        return std::hash<std::string>{}(s);
      }
      std::size_t operator()(Timestamp t) const {
        return std::hash<std::int64_t>{}(t.seconds);
      }
    };
    return h ^ (std::visit(Visitor{}, c) + 0x9e3779b97f4a7c15ULL + (h << 6) +
                (h >> 2));
  }
};

}  // namespace vizrec
