#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scoreline {

enum class ErrorCategory {
  range,
  identity,
  missing_context,
  parse,
  format_detection,
  structure,
  degeneracy,
  empty_input,
  encode,
  io,
  feature,
  frozen,
};

const char* to_string(ErrorCategory c) noexcept;

/// Base of every error thrown by the library. The category is what callers
/// (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

/// Parse failure with an optional source location (1-based; 0 = unknown).
class ParseError : public Error {
public:
  ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  /// Message without the location prefix.
  const std::string& bare_message() const noexcept { return bare_; }

private:
  std::size_t line_;
  std::size_t column_;
  std::string bare_;
};

}  // namespace scoreline
