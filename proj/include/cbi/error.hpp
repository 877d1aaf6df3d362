// Copyright 2026 The CBI Authors
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

namespace cbi {

enum class ErrorKind {
  ParseError,
  ConfigError,
  MissingClass,
  SingularSystem,
  IoError,
  UnsupportedFormat,
  DimensionMismatch,
  SingularTransform,
  DegenerateInput,
  DuplicateOrderIndex,
  Internal,
};

/// Broad failure category; the CLI maps it onto its exit code.
enum class ErrorCategory { Config = 2, Data = 3, Internal = 4 };

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MissingClass: return "MissingClass";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularTransform: return "SingularTransform";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DuplicateOrderIndex: return "DuplicateOrderIndex";
    case ErrorKind::Internal: return "Internal";
  }
  return "Unknown";
}

constexpr ErrorCategory default_category(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::ConfigError:
    case ErrorKind::DuplicateOrderIndex:
      return ErrorCategory::Config;
    case ErrorKind::SingularSystem:
    case ErrorKind::Internal:
      return ErrorCategory::Internal;
    default:
      return ErrorCategory::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : Error(kind, default_category(kind), message) {}

  Error(ErrorKind kind, ErrorCategory category, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        category_(category),
        message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }
  /// Message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

  /// Same kind and category, message prefixed with `context`.
  Error with_context(const std::string& context) const { return Error(kind_, category_, context + ": " + message_); }

 private:
  ErrorKind kind_;
  ErrorCategory category_;
  std::string message_;
};

}  // namespace cbi
