#include "companion/clock.hpp"

#include <cstdio>

#include "companion/error.hpp"

namespace companion {

using namespace std::chrono;

namespace {

int digits(std::string_view text, std::size_t pos, std::size_t count)
{
    if (pos + count > text.size())
        throw Error(Errc::invalid_argument, "truncated date/time '" + std::string(text) + "'");
    int value = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        const char c = text[i];
        if (c < '0' || c > '9')
            throw Error(Errc::invalid_argument, "invalid date/time '" + std::string(text) + "'");
        value = value * 10 + (c - '0');
    }
    return value;
}

void expect(std::string_view text, std::size_t pos, char c)
{
    if (pos >= text.size() || text[pos] != c)
        throw Error(Errc::invalid_argument, "invalid date/time '" + std::string(text) + "'");
}

} // namespace

TimePoint system_now()
{
    return time_point_cast<milliseconds>(system_clock::now());
}

std::string format_date(sys_days day)
{
    const year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

sys_days parse_date(std::string_view text)
{
    const int y = digits(text, 0, 4);
    expect(text, 4, '-');
    const int m = digits(text, 5, 2);
    expect(text, 7, '-');
    const int d = digits(text, 8, 2);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        throw Error(Errc::invalid_argument, "invalid calendar date '" + std::string(text) + "'");
    return sys_days{ymd};
}

std::string to_iso8601(TimePoint t)
{
    const auto day = floor<days>(t);
    const auto since_midnight = t - day;
    const hh_mm_ss<milliseconds> clock{since_midnight};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d.%03dZ", format_date(day).c_str(),
                  static_cast<int>(clock.hours().count()), static_cast<int>(clock.minutes().count()),
                  static_cast<int>(clock.seconds().count()), static_cast<int>(clock.subseconds().count()));
    return buf;
}

TimePoint parse_iso8601(std::string_view text)
{
    const auto day = parse_date(text.substr(0, 10));
    expect(text, 10, 'T');
    const int h = digits(text, 11, 2);
    expect(text, 13, ':');
    const int mi = digits(text, 14, 2);
    expect(text, 16, ':');
    const int s = digits(text, 17, 2);
    std::size_t pos = 19;
    int ms = 0;
    if (pos < text.size() && text[pos] == '.') {
        ms = digits(text, pos + 1, 3);
        pos += 4;
    }
    expect(text, pos, 'Z');
    if (pos + 1 != text.size() || h > 23 || mi > 59 || s > 59)
        throw Error(Errc::invalid_argument, "invalid timestamp '" + std::string(text) + "'");
    return TimePoint{day} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms};
}

minutes parse_utc_offset(std::string_view text)
{
    if (text.substr(0, 3) == "UTC")
        text.remove_prefix(3);
    if (text.empty() || text == "Z")
        return minutes{0};
    if (text.size() != 6 || (text[0] != '+' && text[0] != '-') || text[3] != ':')
        throw Error(Errc::config_error, "unsupported time zone '" + std::string(text) + "'");
    const int h = digits(text, 1, 2);
    const int m = digits(text, 4, 2);
    if (h > 14 || m > 59)
        throw Error(Errc::config_error, "time zone offset out of range '" + std::string(text) + "'");
    const minutes offset{h * 60 + m};
    return text[0] == '-' ? -offset : offset;
}

sys_days local_day(TimePoint t, minutes utc_offset)
{
    return floor<days>(t + utc_offset);
}

} // namespace companion
