#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qwait {

// Base for every error the library reports. Messages are single-line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line and, when known, the column.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::string column = {})
      : Error(message), line_(line), column_(std::move(column)) {}

  std::size_t line() const { return line_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

}  // namespace qwait
