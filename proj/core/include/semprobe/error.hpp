#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace semprobe {

enum class ErrorKind {
  domain,
  insufficient_data,
  schema,
  validation,
  sequencing,
  not_found,
  undefined_ratio,
  conflict,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error thrown by the library. The kind drives CLI exit
/// codes and HTTP status mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Error tied to a 1-based line of an input file.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::string source, std::size_t line,
             const std::string& detail);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Response submitted for a trial index other than the session cursor.
class SequencingError : public Error {
 public:
  SequencingError(std::size_t cursor, std::size_t submitted);

  std::size_t cursor() const noexcept { return cursor_; }

 private:
  std::size_t cursor_;
};

}  // namespace semprobe
