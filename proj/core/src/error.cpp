#include "semprobe/error.hpp"

namespace semprobe {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::schema: return "schema";
    case ErrorKind::validation: return "validation";
    case ErrorKind::sequencing: return "sequencing";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::undefined_ratio: return "undefined_ratio";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

ParseError::ParseError(ErrorKind kind, std::string source, std::size_t line,
                       const std::string& detail)
    : Error(kind, source + ":" + std::to_string(line) + ": " + detail),
      source_(std::move(source)),
      line_(line) {}

SequencingError::SequencingError(std::size_t cursor, std::size_t submitted)
    : Error(ErrorKind::sequencing, "trial index " + std::to_string(submitted) +
                                       " is out of order; current cursor is " +
                                       std::to_string(cursor)),
      cursor_(cursor) {}

}  // namespace semprobe
