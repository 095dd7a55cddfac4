#include "countcast/dates.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace countcast {

namespace {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yr + (m <= 2));
}

bool parse_uint(const std::string& s, size_t begin, size_t end, unsigned& out) {
    if (begin >= end || end > s.size()) return false;
    unsigned value = 0;
    for (size_t i = begin; i < end; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        value = value * 10 + static_cast<unsigned>(s[i] - '0');
    }
    out = value;
    return true;
}

}  // namespace

Date Date::from_civil(int year, unsigned month, unsigned day) {
    return Date(days_from_civil(year, month, day));
}

void Date::to_civil(int& year, unsigned& month, unsigned& day) const {
    civil_from_days(days_, year, month, day);
}

Date Date::parse(const std::string& text, bool dmy) {
    unsigned a = 0, b = 0, c = 0;
    const char sep = dmy ? '/' : '-';
    const size_t p1 = text.find(sep);
    const size_t p2 = p1 == std::string::npos ? std::string::npos : text.find(sep, p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos ||
        !parse_uint(text, 0, p1, a) || !parse_uint(text, p1 + 1, p2, b) ||
        !parse_uint(text, p2 + 1, text.size(), c)) {
        throw DataError("unparseable date '" + text + "'");
    }
    unsigned year = dmy ? c : a;
    unsigned month = b;
    unsigned day = dmy ? a : c;
    if (year < 100) year += 2000;  // two-digit years appear in some source files
    if (month < 1 || month > 12 || day < 1 || day > 31) {
        throw DataError("date '" + text + "' out of range");
    }
    const Date parsed = from_civil(static_cast<int>(year), month, day);
    int y2;
    unsigned m2, d2;
    parsed.to_civil(y2, m2, d2);
    if (y2 != static_cast<int>(year) || m2 != month || d2 != day) {
        // e.g. February 31st would otherwise normalize into March
        throw DataError("date '" + text + "' out of range");
    }
    return parsed;
}

std::string Date::to_iso() const {
    int y;
    unsigned m, d;
    to_civil(y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
    return buf;
}

}  // namespace countcast
