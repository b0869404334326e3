#include "qwait/time.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "qwait/error.hpp"

namespace qwait {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool parse_uint(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && out >= 0;
}

[[noreturn]] void bad(std::string_view what, std::string_view text) {
  throw Error(std::string(what) + ": '" + std::string(text) + "'");
}

}  // namespace

std::int64_t civil_day(Instant t) { return floor_div(t, kSecondsPerDay); }

int day_of_week(Instant t) {
  // 1970-01-01 was a Thursday (3 with Monday = 0).
  return static_cast<int>(((civil_day(t) + 3) % 7 + 7) % 7);
}

int hour_of_day(Instant t) {
  return static_cast<int>((t - civil_day(t) * kSecondsPerDay) / 3600);
}

Instant parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDThh:mm:ss is 19 characters.
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    bad("invalid ISO-8601 timestamp", text);
  }
  std::int64_t y, mo, d, h, mi, s;
  if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), mo) ||
      !parse_uint(text.substr(8, 2), d) || !parse_uint(text.substr(11, 2), h) ||
      !parse_uint(text.substr(14, 2), mi) || !parse_uint(text.substr(17, 2), s)) {
    bad("invalid ISO-8601 timestamp", text);
  }
  const year_month_day ymd{year{static_cast<int>(y)}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) bad("invalid ISO-8601 timestamp", text);

  std::int64_t offset = 0;
  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    // Fractional seconds are truncated.
    std::size_t i = 1;
    while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') ++i;
    rest.remove_prefix(i);
  }
  if (rest == "Z" || rest.empty()) {
    offset = 0;
  } else if ((rest.front() == '+' || rest.front() == '-') && rest.size() == 6 && rest[3] == ':') {
    std::int64_t oh, om;
    if (!parse_uint(rest.substr(1, 2), oh) || !parse_uint(rest.substr(4, 2), om)) {
      bad("invalid ISO-8601 offset", text);
    }
    offset = (oh * 3600 + om * 60) * (rest.front() == '+' ? 1 : -1);
  } else {
    bad("invalid ISO-8601 timestamp", text);
  }
  const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  return days * kSecondsPerDay + h * 3600 + mi * 60 + s - offset;
}

std::string format_date(std::int64_t day) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_iso8601(Instant t) {
  const std::int64_t day = civil_day(t);
  const std::int64_t sod = t - day * kSecondsPerDay;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(day).c_str(),
                static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                static_cast<int>(sod % 60));
  return buf;
}

Instant parse_instant(std::string_view text) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (!text.empty() && ec == std::errc{} && ptr == end) return v;
  return parse_iso8601(text);
}

Seconds parse_slurm_duration(std::string_view text) {
  std::int64_t days = 0;
  if (auto dash = text.find('-'); dash != std::string_view::npos) {
    if (!parse_uint(text.substr(0, dash), days)) bad("invalid time limit", text);
    text.remove_prefix(dash + 1);
  }
  std::int64_t parts[3] = {0, 0, 0};
  int n = 0;
  std::string_view rest = text;
  while (true) {
    const auto colon = rest.find(':');
    if (n == 3) bad("invalid time limit", text);
    if (!parse_uint(rest.substr(0, colon), parts[n])) bad("invalid time limit", text);
    ++n;
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  Seconds secs = 0;
  if (n == 1) {
    // Bare minutes, or hours when a day prefix is present ("d-hh").
    secs = days > 0 ? parts[0] * 3600 : parts[0] * 60;
  } else if (n == 2) {
    // "mm:ss", or "hh:mm" after a day prefix.
    secs = days > 0 ? parts[0] * 3600 + parts[1] * 60 : parts[0] * 60 + parts[1];
  } else {
    secs = parts[0] * 3600 + parts[1] * 60 + parts[2];
  }
  return days * kSecondsPerDay + secs;
}

Seconds parse_duration(std::string_view text) {
  if (text.empty()) bad("invalid duration", text);
  Seconds scale = 1;
  switch (text.back()) {
    case 's': scale = 1; break;
    case 'm': scale = 60; break;
    case 'h': scale = 3600; break;
    case 'd': scale = kSecondsPerDay; break;
    default: scale = 0;
  }
  std::string_view num = scale == 0 ? text : text.substr(0, text.size() - 1);
  if (scale == 0) scale = 1;
  std::int64_t v = 0;
  if (!parse_uint(num, v)) bad("invalid duration", text);
  return v * scale;
}

}  // namespace qwait
