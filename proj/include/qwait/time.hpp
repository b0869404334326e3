#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qwait {

// Integer seconds since the Unix epoch, UTC.
using Instant = std::int64_t;
// Integer seconds.
using Seconds = std::int64_t;

inline constexpr Seconds kSecondsPerDay = 86400;

// Days since 1970-01-01 (floored, so negative instants map to earlier days).
std::int64_t civil_day(Instant t);

// 0 = Monday ... 6 = Sunday, UTC.
int day_of_week(Instant t);

// 0..23, UTC.
int hour_of_day(Instant t);

// "YYYY-MM-DD[T ]hh:mm:ss" with optional trailing "Z" or "+hh:mm"/"-hh:mm".
// Without an offset the timestamp is taken as UTC. Throws Error.
Instant parse_iso8601(std::string_view text);

std::string format_iso8601(Instant t);
std::string format_date(std::int64_t day);

// Either an integer epoch value or an ISO-8601 timestamp.
Instant parse_instant(std::string_view text);

// Slurm time limits: "[d-]hh:mm:ss", "hh:mm:ss", "mm:ss" or plain minutes.
Seconds parse_slurm_duration(std::string_view text);

// CLI durations: plain seconds or a number with an s/m/h/d suffix ("90m", "2h").
Seconds parse_duration(std::string_view text);

}  // namespace qwait
