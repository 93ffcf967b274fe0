#include "epimob/time.hpp"

#include "epimob/error.hpp"

#include <charconv>
#include <cstdio>

namespace epimob {

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    auto first = s.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    return ec == std::errc{} && ptr == first + len;
}

[[noreturn]] void bad_timestamp(std::string_view text) {
    throw InvalidInput("invalid timestamp '" + std::string(text) + "'");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

std::chrono::sys_days parse_date(std::string_view text) {
    text = trim(text);
    int y = 0, m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !read_int(text, 0, 4, y) ||
        !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
        throw InvalidInput("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw InvalidInput("invalid date '" + std::string(text) + "'");
    return std::chrono::sys_days{ymd};
}

UtcSeconds parse_timestamp(std::string_view text) {
    text = trim(text);
    if (text.empty()) bad_timestamp(text);
    if (text.size() < 10 || text[4] != '-') {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size()) bad_timestamp(text);
        return v;
    }
    const auto day = parse_date(text.substr(0, 10));
    UtcSeconds t = day.time_since_epoch().count() * kSecondsPerDay;
    if (text.size() == 10) return t;
    if (text[10] != 'T' && text[10] != ' ') bad_timestamp(text);
    int hh = 0, mm = 0, ss = 0;
    if (!read_int(text, 11, 2, hh) || text.size() < 16 || text[13] != ':' || !read_int(text, 14, 2, mm))
        bad_timestamp(text);
    std::size_t pos = 16;
    if (pos < text.size() && text[pos] == ':') {
        if (!read_int(text, pos + 1, 2, ss)) bad_timestamp(text);
        pos += 3;
    }
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    if (hh > 24 || mm > 59 || ss > 60) bad_timestamp(text);
    t += hh * 3600 + mm * 60 + ss;
    if (pos == text.size()) return t;
    if (text[pos] == 'Z' && pos + 1 == text.size()) return t;
    if (text[pos] == '+' || text[pos] == '-') {
        int oh = 0, om = 0;
        if (!read_int(text, pos + 1, 2, oh)) bad_timestamp(text);
        std::size_t mpos = pos + 3;
        if (mpos < text.size() && text[mpos] == ':') ++mpos;
        if (mpos < text.size() && !read_int(text, mpos, 2, om)) bad_timestamp(text);
        const int offset = oh * 3600 + om * 60;
        return text[pos] == '+' ? t - offset : t + offset;
    }
    bad_timestamp(text);
}

std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_timestamp(UtcSeconds t) {
    const auto day = floor_div(t, kSecondsPerDay);
    const auto sod = t - day * kSecondsPerDay;
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(sod / 3600),
                  static_cast<int>((sod / 60) % 60), static_cast<int>(sod % 60));
    return format_date(std::chrono::sys_days{std::chrono::days{day}}) + buf;
}

int parse_clock(std::string_view text) {
    text = trim(text);
    int hh = 0, mm = 0;
    if (text.size() != 5 || text[2] != ':' || !read_int(text, 0, 2, hh) || !read_int(text, 3, 2, mm) || hh > 24 ||
        mm > 59 || (hh == 24 && mm != 0)) {
        throw InvalidInput("invalid clock time '" + std::string(text) + "', expected HH:MM");
    }
    return hh * 3600 + mm * 60;
}

std::string format_clock(int seconds_of_day) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", seconds_of_day / 3600, (seconds_of_day / 60) % 60);
    return buf;
}

void Horizon::validate() const {
    if (step <= 0) throw InvalidInput("step must be positive", "step");
    if (end <= start) throw InvalidInput("horizon is empty", "horizon");
    if ((end - start) % step != 0) throw InvalidInput("horizon length is not a multiple of the step", "horizon");
}

Horizon local_days_horizon(std::chrono::sys_days first_day, int days, int step, const LocalClock& clock) {
    if (days <= 0) throw InvalidInput("days must be positive", "days");
    Horizon h;
    h.start = clock.midnight_utc(first_day.time_since_epoch().count());
    h.end = h.start + static_cast<UtcSeconds>(days) * kSecondsPerDay;
    h.step = step;
    h.validate();
    return h;
}

} // namespace epimob
