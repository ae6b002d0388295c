#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace fairtopk {

// Calendar date at day resolution. Temporal split blocks are whole
// calendar months, so we only need parsing, ordering and month stepping.
struct Date {
    int year = 1970;
    int month = 1;  // 1-12
    int day = 1;    // 1-31

    // Days since 1970-01-01 (civil calendar); used for ordering and
    // uniform sampling of timestamps.
    [[nodiscard]] std::int64_t serial() const;

    friend bool operator==(const Date& a, const Date& b) = default;
    friend std::strong_ordering operator<=>(const Date& a, const Date& b)
    {
        return a.serial() <=> b.serial();
    }

    // Adds whole calendar months, clamping the day to the target month's
    // length (2010-01-31 + 1 month -> 2010-02-28).
    [[nodiscard]] Date add_months(int n) const;

    [[nodiscard]] std::string to_string() const;  // ISO-8601 YYYY-MM-DD

    static Date parse(const std::string& text);
    static Date from_serial(std::int64_t days);
};

}  // namespace fairtopk
