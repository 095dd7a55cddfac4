#pragma once

#include <cstdint>
#include <string>

#include "countcast/errors.hpp"

namespace countcast {

// Calendar day stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    Date() = default;
    explicit Date(std::int64_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_civil(int year, unsigned month, unsigned day);
    void to_civil(int& year, unsigned& month, unsigned& day) const;

    // "YYYY-MM-DD" or, with dmy=true, "DD/MM/YYYY".
    static Date parse(const std::string& text, bool dmy);
    std::string to_iso() const;

    std::int64_t days() const { return days_; }

    Date operator+(std::int64_t n) const { return Date(days_ + n); }
    std::int64_t operator-(Date o) const { return days_ - o.days_; }
    auto operator<=>(const Date&) const = default;

private:
    std::int64_t days_ = 0;
};

}  // namespace countcast
