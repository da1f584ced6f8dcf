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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vizrec {

// Root of every exception thrown by the engine. `domain()` names the module
// that raised it and `kind_name()` the specific failure, so callers that only
// care about the category (the HTTP layer) do not need to know every type.
class Error : public std::runtime_error {
 public:
  Error(std::string_view domain, std::string_view kind, const std::string& what)
      : std::runtime_error(what), domain_(domain), kind_(kind) {}

  const std::string& domain() const noexcept { return domain_; }
  const std::string& kind_name() const noexcept { return kind_; }

 private:
  std::string domain_;
  std::string kind_;
};

// An error whose failure mode is one value of `KindEnum`. `Traits` supplies
// the domain name and a `name(KindEnum)` function.
template <typename Traits>
class CodedError : public Error {
 public:
  using Kind = typename Traits::Kind;

  CodedError(Kind kind, const std::string& message)
      : Error(Traits::kDomain, Traits::name(kind),
              std::string(Traits::kDomain) + "::" +
                  std::string(Traits::name(kind)) + ": " + message),
        kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

#define VIZREC_DEFINE_ERROR(ErrorName, ...)                                  \
  struct ErrorName##Traits {                                                 \
    enum class Kind { __VA_ARGS__ };                                         \
    static constexpr const char* kDomain = #ErrorName;                       \
    static std::string_view name(Kind k) {                                   \
      static constexpr std::string_view kNames = #__VA_ARGS__;               \
      std::size_t index = static_cast<std::size_t>(k);                       \
      std::size_t start = 0;                                                 \
      for (std::size_t i = 0; i < index; ++i) {                              \
        start = kNames.find(',', start) + 1;                                 \
      }                                                                      \
      while (start < kNames.size() && kNames[start] == ' ') ++start;         \
      std::size_t end = kNames.find(',', start);                             \
      if (end == std::string_view::npos) end = kNames.size();                \
      return kNames.substr(start, end - start);                              \
    }                                                                        \
  };                                                                         \
  using ErrorName = CodedError<ErrorName##Traits>

VIZREC_DEFINE_ERROR(IngestError, Empty, DuplicateColumn, NoRows, FileNotFound,
                    RaggedRow, TooManyRows);
VIZREC_DEFINE_ERROR(ExecError, UnknownField, TypeMismatch, EmptyResult,
                    NonFinite, InvalidTransform);
VIZREC_DEFINE_ERROR(GraphError, NoColumns, UnknownNode, UnknownLayer);
VIZREC_DEFINE_ERROR(BackpropError, BrokenPath);
VIZREC_DEFINE_ERROR(FreezeError, EmptyKeepSet);
VIZREC_DEFINE_ERROR(ModelError, DimensionMismatch, BadFormat);
VIZREC_DEFINE_ERROR(RangeError, OutOfRange);
VIZREC_DEFINE_ERROR(TrainError, DegenerateCorpus);
VIZREC_DEFINE_ERROR(SearchError, NoValidQuery, DeadEnd);
VIZREC_DEFINE_ERROR(OracleError, TooLarge);
VIZREC_DEFINE_ERROR(TemplateError, Inapplicable);
VIZREC_DEFINE_ERROR(SessionError, UnknownHint, UnknownQuery, UnknownRound,
                    ReplayMismatch, BadLog);

// Canonical-text parse failure. `offset` is a byte offset into the input and
// `token` the 1-based index of the offending token.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::size_t token, std::string expected)
      : Error("ParseError", "Syntax",
              "ParseError at offset " + std::to_string(offset) + " (token " +
                  std::to_string(token) + "): expected " + expected),
        offset_(offset),
        token_(token),
        expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  std::size_t token() const noexcept { return token_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::size_t token_;
  std::string expected_;
};

}  // namespace vizrec
