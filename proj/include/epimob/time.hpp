#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace epimob {

using UtcSeconds = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kSecondsPerHour = 3600;

// Parses "2012-07-01T09:00:00Z", "2012-07-01T09:00:00+09:00", "2012-07-01 09:00:00"
// (UTC assumed) or a bare integer of epoch seconds.
UtcSeconds parse_timestamp(std::string_view text);

// "YYYY-MM-DD" -> days since 1970-01-01.
std::chrono::sys_days parse_date(std::string_view text);

std::string format_timestamp(UtcSeconds t);
std::string format_date(std::chrono::sys_days day);

// "HH:MM" -> seconds since midnight; "24:00" allowed.
int parse_clock(std::string_view text);
std::string format_clock(int seconds_of_day);

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Fixed-offset local clock for a dataset (default UTC+9).
struct LocalClock {
    int utc_offset_s = 9 * 3600;

    std::int64_t local_seconds(UtcSeconds t) const { return t + utc_offset_s; }
    // Days since 1970-01-01 in local time.
    std::int64_t local_day(UtcSeconds t) const { return floor_div(local_seconds(t), kSecondsPerDay); }
    int seconds_of_day(UtcSeconds t) const {
        return static_cast<int>(local_seconds(t) - local_day(t) * kSecondsPerDay);
    }
    int hour_of_day(UtcSeconds t) const { return seconds_of_day(t) / 3600; }
    // 0 = Monday ... 6 = Sunday
    int weekday(UtcSeconds t) const { return weekday_of_day(local_day(t)); }
    static int weekday_of_day(std::int64_t day) {
        // 1970-01-01 was a Thursday.
        return static_cast<int>(((day % 7) + 7 + 3) % 7);
    }
    UtcSeconds midnight_utc(std::int64_t local_day_index) const {
        return local_day_index * kSecondsPerDay - utc_offset_s;
    }

    friend bool operator==(const LocalClock&, const LocalClock&) = default;
};

// Simulation horizon [start, end) sampled every `step` seconds.
struct Horizon {
    UtcSeconds start = 0;
    UtcSeconds end = 0;
    int step = 300;

    std::int64_t ticks() const { return (end - start) / step; }
    UtcSeconds tick_time(std::int64_t tick) const { return start + tick * step; }
    bool contains(UtcSeconds t) const { return t >= start && t < end; }

    // Throws InvalidInput when the span is empty or not a whole number of steps.
    void validate() const;

    friend bool operator==(const Horizon&, const Horizon&) = default;
};

// Horizon of `days` whole local days starting at local midnight of `first_day`.
Horizon local_days_horizon(std::chrono::sys_days first_day, int days, int step, const LocalClock& clock);

} // namespace epimob
