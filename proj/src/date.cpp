#include "fairtopk/date.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace fairtopk {

namespace {

bool is_leap(int y)
{
    return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
}

int days_in_month(int y, int m)
{
    static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                    31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return lengths[static_cast<std::size_t>(m - 1)];
}

}  // namespace

// Howard Hinnant's civil-from-days / days-from-civil algorithms.
std::int64_t Date::serial() const
{
    std::int64_t y = year;
    unsigned m = static_cast<unsigned>(month);
    unsigned d = static_cast<unsigned>(day);
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date Date::from_serial(std::int64_t days)
{
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(days - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                static_cast<int>(d)};
}

Date Date::add_months(int n) const
{
    int total = (year * 12 + (month - 1)) + n;
    int y = total / 12;
    int m = total % 12;
    if (m < 0) {
        m += 12;
        y -= 1;
    }
    Date out{y, m + 1, day};
    int dim = days_in_month(out.year, out.month);
    if (out.day > dim) out.day = dim;
    return out;
}

std::string Date::to_string() const
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

Date Date::parse(const std::string& text)
{
    Date d;
    const char* b = text.data();
    const char* e = b + text.size();
    auto take = [&](int& out, int width, char sep) {
        auto [p, ec] = std::from_chars(b, e, out);
        if (ec != std::errc{} || p - b != width)
            throw std::invalid_argument("invalid date: " + text);
        b = p;
        if (sep != '\0') {
            if (b == e || *b != sep)
                throw std::invalid_argument("invalid date: " + text);
            ++b;
        }
    };
    take(d.year, 4, '-');
    take(d.month, 2, '-');
    take(d.day, 2, '\0');
    if (b != e || d.month < 1 || d.month > 12 || d.day < 1 ||
        d.day > days_in_month(d.year, d.month))
        throw std::invalid_argument("invalid date: " + text);
    return d;
}

}  // namespace fairtopk
