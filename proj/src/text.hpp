#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qwait/error.hpp"

namespace qwait::detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  // sacct --parsable leaves a trailing separator.
  if (out.size() > 1 && out.back().empty() && !line.empty() && line.back() == sep) out.pop_back();
  return out;
}

inline std::int64_t parse_int_field(std::string_view field, std::size_t line, std::string_view column) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("malformed value '" + std::string(field) + "' in column " + std::string(column) +
                         " at line " + std::to_string(line),
                     line, std::string(column));
  }
  return v;
}

inline double parse_double_field(std::string_view field, std::size_t line, std::string_view column) {
  double v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("malformed value '" + std::string(field) + "' in column " + std::string(column) +
                         " at line " + std::to_string(line),
                     line, std::string(column));
  }
  return v;
}

}  // namespace qwait::detail
