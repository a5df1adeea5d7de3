#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

namespace companion {

using TimePoint = std::chrono::sys_time<std::chrono::milliseconds>;
using ClockFn = std::function<TimePoint()>;

TimePoint system_now();

/// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string to_iso8601(TimePoint t);
TimePoint parse_iso8601(std::string_view text);

std::string format_date(std::chrono::sys_days day);
std::chrono::sys_days parse_date(std::string_view text);

/// Accepts "UTC", "Z", "+HH:MM" and "-HH:MM" (optionally prefixed with "UTC").
std::chrono::minutes parse_utc_offset(std::string_view text);

/// Calendar day of `t` in a zone with the given fixed offset from UTC.
std::chrono::sys_days local_day(TimePoint t, std::chrono::minutes utc_offset);

} // namespace companion
