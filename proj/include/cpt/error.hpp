// Copyright 2026 The CPT Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpt {

enum class ErrorKind {
  kInvalidArgument,
  kEmptyIntersection,
  kDimensionMismatch,
  kDuplicateColor,
  kEmptyQuery,
  kEmptyText,
  kBadMaskCount,
  kNoProposals,
  kNonFiniteLogit,
  kCandidateMismatch,
  kGoldMissing,
  kMissingTemplate,
  kTokenNotCandidate,
  kAllDiscarded,
  kPoolTooSmall,
  kParse,
  kValidation,
  kIo,
  kMissingMeta,
  kTransport,
  kProtocol,
  kModelFailure,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kEmptyIntersection: return "EmptyIntersection";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kDuplicateColor: return "DuplicateColor";
    case ErrorKind::kEmptyQuery: return "EmptyQuery";
    case ErrorKind::kEmptyText: return "EmptyText";
    case ErrorKind::kBadMaskCount: return "BadMaskCount";
    case ErrorKind::kNoProposals: return "NoProposals";
    case ErrorKind::kNonFiniteLogit: return "NonFiniteLogit";
    case ErrorKind::kCandidateMismatch: return "CandidateMismatch";
    case ErrorKind::kGoldMissing: return "GoldMissing";
    case ErrorKind::kMissingTemplate: return "MissingTemplate";
    case ErrorKind::kTokenNotCandidate: return "TokenNotCandidate";
    case ErrorKind::kAllDiscarded: return "AllDiscarded";
    case ErrorKind::kPoolTooSmall: return "PoolTooSmall";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kValidation: return "ValidationError";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kMissingMeta: return "MissingMeta";
    case ErrorKind::kTransport: return "Transport";
    case ErrorKind::kProtocol: return "Protocol";
    case ErrorKind::kModelFailure: return "ModelFailure";
  }
  return "Unknown";
}

// All toolkit failures surface as cpt::Error; kind() is the stable
// discriminator tests and the CLI's exit-code mapping rely on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  bool is_backend() const noexcept {
    return kind_ == ErrorKind::kTransport || kind_ == ErrorKind::kProtocol ||
           kind_ == ErrorKind::kModelFailure || kind_ == ErrorKind::kMissingMeta;
  }

 private:
  ErrorKind kind_;
};

class BackendError : public Error {
 public:
  BackendError(ErrorKind kind, const std::string& message, bool retryable)
      : Error(kind, message), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

// Parse/validation failures from line-oriented inputs carry the 1-based line.
class InputError : public Error {
 public:
  InputError(ErrorKind kind, std::size_t line, std::string field,
             const std::string& message)
      : Error(kind, "line " + std::to_string(line) +
                        (field.empty() ? "" : " field '" + field + "'") + ": " +
                        message),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace cpt
