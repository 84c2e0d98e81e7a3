#pragma once

// Day-number arithmetic and RFC 3339 timestamp handling. All analysis runs
// on integer day numbers (days since 1970-01-01, UTC), so the rest of the
// code never touches time zones or sub-day precision.

#include <charconv>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace osvtrace {

using DayNumber = int32_t;

struct DateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Days since 1970-01-01 for a proleptic Gregorian civil date.
constexpr DayNumber days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<DayNumber>(era * 146097 + static_cast<int>(doe) - 719468);
}

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

constexpr CivilDate civil_from_days(DayNumber z) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {y + (m <= 2), m, d};
}

constexpr DayNumber kDayY2K = days_from_civil(2000, 1, 1); // 10957

namespace detail {

inline bool parse_uint(std::string_view s, unsigned& out) {
    if (s.empty()) return false;
    unsigned v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    out = v;
    return true;
}

inline bool valid_civil(unsigned y, unsigned m, unsigned d) {
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr unsigned lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    unsigned len = lengths[m - 1];
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    if (m == 2 && leap) len = 29;
    return d <= len;
}

} // namespace detail

/// Parse `YYYY-MM-DD` into a day number. Throws DateError on malformed input.
inline DayNumber parse_iso_date(std::string_view s) {
    unsigned y = 0, m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
        !detail::parse_uint(s.substr(0, 4), y) ||
        !detail::parse_uint(s.substr(5, 2), m) ||
        !detail::parse_uint(s.substr(8, 2), d) ||
        !detail::valid_civil(y, m, d)) {
        throw DateError("invalid ISO date: " + std::string(s));
    }
    return days_from_civil(static_cast<int>(y), m, d);
}

inline std::string format_iso_date(DayNumber day) {
    const CivilDate c = civil_from_days(day);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

/// Parse an RFC 3339 timestamp (e.g. `2021-03-01T12:34:56Z`,
/// `2021-03-01T12:34:56.123+02:00`) and truncate the UTC instant to its day
/// number. Throws DateError on malformed input.
inline DayNumber rfc3339_to_day(std::string_view s) {
    const auto fail = [&]() -> DayNumber {
        throw DateError("invalid RFC 3339 timestamp: " + std::string(s));
    };
    if (s.size() < 20) return fail();
    unsigned y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':' ||
        !detail::parse_uint(s.substr(0, 4), y) ||
        !detail::parse_uint(s.substr(5, 2), mo) ||
        !detail::parse_uint(s.substr(8, 2), d) ||
        !detail::parse_uint(s.substr(11, 2), h) ||
        !detail::parse_uint(s.substr(14, 2), mi) ||
        !detail::parse_uint(s.substr(17, 2), sec) ||
        !detail::valid_civil(y, mo, d) || h > 23 || mi > 59 || sec > 60) {
        return fail();
    }
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') { // fractional seconds: truncate
        ++pos;
        const std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) return fail();
    }
    if (pos >= s.size()) return fail();
    int64_t offset_sec = 0;
    const char z = s[pos];
    if (z == 'Z' || z == 'z') {
        if (pos + 1 != s.size()) return fail();
    } else if (z == '+' || z == '-') {
        unsigned oh = 0, om = 0;
        if (pos + 6 != s.size() || s[pos + 3] != ':' ||
            !detail::parse_uint(s.substr(pos + 1, 2), oh) ||
            !detail::parse_uint(s.substr(pos + 4, 2), om) || oh > 23 || om > 59) {
            return fail();
        }
        offset_sec = static_cast<int64_t>(oh) * 3600 + om * 60;
        if (z == '-') offset_sec = -offset_sec;
    } else {
        return fail();
    }
    const int64_t utc_sec =
        static_cast<int64_t>(days_from_civil(static_cast<int>(y), mo, d)) * 86400 +
        h * 3600 + mi * 60 + sec - offset_sec;
    // floor division keeps pre-1970 instants on the correct day
    int64_t day = utc_sec / 86400;
    if (utc_sec % 86400 < 0) --day;
    return static_cast<DayNumber>(day);
}

} // namespace osvtrace
