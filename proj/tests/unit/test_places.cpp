#include "epimob/error.hpp"
#include "epimob/places/places.hpp"
#include "epimob/rng.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace epimob;
using namespace epimob::places;
using epimob::mobility::offset_km;
using epimob::mobility::RawTrajectory;
using epimob::testing::keep_moving;
using epimob::testing::monday_midnight;
using epimob::testing::stay_at;

namespace {

const geo::GridSystem& h3() {
    static auto g = geo::make_h3_grid();
    return *g;
}

const geo::Resolution kRes(8);
const LatLon kHome{35.70, 139.70};
const LatLon kOffice{35.68, 139.77};

Horizon days_horizon(int days) { return local_days_horizon(parse_date("2012-07-02"), days, 300, LocalClock{}); }

// Home 00:00-07:00 every day, office 11:00-18:00 on weekdays, moving otherwise.
RawTrajectory textbook_commuter(int days, const std::vector<LatLon>& offices) {
    RawTrajectory raw{"c", {}};
    const UtcSeconds m0 = monday_midnight();
    for (int d = 0; d < days; ++d) {
        const UtcSeconds mid = m0 + d * kSecondsPerDay;
        stay_at(raw, mid, mid + 7 * 3600, kHome);
        const bool weekday = (d % 7) < 5;
        if (weekday) {
            keep_moving(raw, mid + 7 * 3600 + 600, mid + 11 * 3600 - 600, kHome);
            stay_at(raw, mid + 11 * 3600, mid + 18 * 3600, offices[static_cast<std::size_t>(d) % offices.size()]);
            keep_moving(raw, mid + 18 * 3600 + 600, mid + kSecondsPerDay - 600, kHome);
        } else {
            keep_moving(raw, mid + 7 * 3600 + 600, mid + kSecondsPerDay - 600, kHome);
        }
    }
    return raw;
}

} // namespace

TEST_CASE("stay point examples") {
    const UtcSeconds t0 = monday_midnight() + 8 * 3600;

    SUBCASE("fixed for two hours") {
        RawTrajectory raw{"u", {}};
        stay_at(raw, t0, t0 + 7200, kHome, 300);
        const auto stays = extract_stay_points(raw, h3(), kRes);
        REQUIRE(stays.size() == 1);
        CHECK(stays[0].duration() == 7200);
        CHECK(stays[0].cell == h3().cell_of(kHome, kRes));
    }

    SUBCASE("moving 1 km every 10 minutes") {
        RawTrajectory raw{"u", {}};
        for (int k = 0; k < 30; ++k) raw.points.push_back({t0 + k * 600, offset_km(kHome, 0.0, k * 1.0)});
        CHECK(extract_stay_points(raw, h3(), kRes).empty());
    }

    SUBCASE("50 minutes, a 2 km jump, then 90 minutes") {
        RawTrajectory raw{"u", {}};
        stay_at(raw, t0, t0 + 50 * 60, kHome, 300);
        const LatLon far = offset_km(kHome, 2.0, 0.0);
        stay_at(raw, t0 + 55 * 60, t0 + 145 * 60, far, 300);
        const auto stays = extract_stay_points(raw, h3(), kRes);
        REQUIRE(stays.size() == 1);
        CHECK(stays[0].arrive == t0 + 55 * 60);
        CHECK(stays[0].duration() == 90 * 60);
        CHECK(stays[0].anchor == far);
    }
}

TEST_CASE("stay points are disjoint, ordered and within radius") {
    const auto& city = testing::small_city();
    for (const auto& raw : city.raw) {
        const auto stays = extract_stay_points(raw, h3(), kRes);
        for (std::size_t i = 0; i < stays.size(); ++i) {
            CHECK(stays[i].duration() >= 3600);
            if (i > 0) CHECK(stays[i - 1].depart < stays[i].arrive);
            for (const auto& p : raw.points) {
                if (p.t >= stays[i].arrive && p.t <= stays[i].depart) {
                    CHECK(geo::haversine_m(p.pos, stays[i].anchor) <= 500.0);
                }
            }
        }
    }
}

TEST_CASE("textbook commuter over 30 days") {
    const int days = 30;
    const auto raw = textbook_commuter(days, {kOffice});
    const Horizon h = days_horizon(days);
    int weekdays = 0;
    for (int d = 0; d < days; ++d) weekdays += (d % 7) < 5;

    const auto r = extract_home_work(raw, h, h3(), kRes);
    REQUIRE(r.accepted());
    CHECK(r.candidate.home_cell == h3().cell_of(kHome, kRes));
    CHECK(r.candidate.work_cell == h3().cell_of(kOffice, kRes));
    CHECK(r.candidate.home_rate == doctest::Approx(1.0));
    CHECK(r.candidate.work_rate == doctest::Approx(1.0));

    // Counting every day in the denominator caps the rate at weekdays / days.
    HomeWorkOptions all_days;
    all_days.work_weekdays_only = false;
    const auto r2 = extract_home_work(raw, h, h3(), kRes, all_days);
    CHECK(r2.candidate.work_rate == doctest::Approx(static_cast<double>(weekdays) / days));
    CHECK(r2.rejection == HomeWorkRejection::low_work_rate);
}

TEST_CASE("workers split between two offices are rejected") {
    const auto raw = textbook_commuter(28, {kOffice, offset_km(kOffice, 3.0, 0.0)});
    const auto r = extract_home_work(raw, days_horizon(28), h3(), kRes);
    CHECK(r.rejection == HomeWorkRejection::low_work_rate);
    CHECK(r.candidate.work_rate == doctest::Approx(0.5));
}

TEST_CASE("stays of 20 h, 19 h and 18 h in a 180 h window are rejected") {
    // 30 days, every day counted: 30 x 6 h = 180 h of working hours.
    RawTrajectory raw{"jim", {}};
    const UtcSeconds m0 = monday_midnight();
    const LatLon g1 = kOffice;
    const LatLon g2 = offset_km(kOffice, 3.0, 0.0);
    const LatLon g3 = offset_km(kOffice, 0.0, 3.0);
    struct Visit {
        LatLon where;
        int hours;
    };
    // Split each cell's total into whole-hour visits on separate days.
    std::vector<Visit> plan;
    for (auto [where, total] : {std::pair{g1, 20}, std::pair{g2, 19}, std::pair{g3, 18}}) {
        while (total > 0) {
            const int h = std::min(total, 6);
            plan.push_back({where, h});
            total -= h;
        }
    }
    REQUIRE(plan.size() <= 30);
    for (int d = 0; d < 30; ++d) {
        const UtcSeconds mid = m0 + d * kSecondsPerDay;
        stay_at(raw, mid, mid + 6 * 3600, kHome);
        if (static_cast<std::size_t>(d) < plan.size()) {
            keep_moving(raw, mid + 6 * 3600 + 600, mid + 11 * 3600 - 600, kHome);
            stay_at(raw, mid + 11 * 3600, mid + (11 + plan[static_cast<std::size_t>(d)].hours) * 3600,
                    plan[static_cast<std::size_t>(d)].where);
            keep_moving(raw, mid + (11 + plan[static_cast<std::size_t>(d)].hours) * 3600 + 600,
                        mid + kSecondsPerDay - 600, kHome);
        } else {
            keep_moving(raw, mid + 6 * 3600 + 600, mid + kSecondsPerDay - 600, kHome);
        }
    }
    HomeWorkOptions opt;
    opt.work_weekdays_only = false;
    const auto r = extract_home_work(raw, days_horizon(30), h3(), kRes, opt);
    CHECK(r.rejection == HomeWorkRejection::low_work_rate);
    CHECK(r.candidate.work_cell == h3().cell_of(g1, kRes));
    CHECK(r.candidate.work_rate == doctest::Approx(20.0 / 180.0));
}

TEST_CASE("argmax ties go to the smaller cell id") {
    const LatLon a = kOffice;
    const LatLon b = offset_km(kOffice, 3.0, 0.0);
    // Alternate offices on an even number of weekdays.
    const auto raw = textbook_commuter(14, {a, b});
    HomeWorkOptions opt;
    opt.threshold = 0.4;
    const auto r = extract_home_work(raw, days_horizon(14), h3(), kRes, opt);
    const CellId ca = h3().cell_of(a, kRes);
    const CellId cb = h3().cell_of(b, kRes);
    CHECK(r.candidate.work_rate == doctest::Approx(0.5));
    CHECK(r.candidate.work_cell == std::min(ca, cb));
}

TEST_CASE("no stays and same-cell results are rejected with a reason") {
    RawTrajectory moving{"m", {}};
    keep_moving(moving, monday_midnight(), monday_midnight() + kSecondsPerDay, kHome);
    CHECK(extract_home_work(moving, days_horizon(1), h3(), kRes).rejection == HomeWorkRejection::no_stay_points);

    RawTrajectory homebody{"h", {}};
    stay_at(homebody, monday_midnight(), monday_midnight() + 7 * kSecondsPerDay - 600, kHome);
    const auto r = extract_home_work(homebody, days_horizon(7), h3(), kRes);
    CHECK(r.rejection == HomeWorkRejection::same_cell);
    CHECK(std::string(to_string(r.rejection)) == "same_cell");
    HomeWorkOptions allow;
    allow.allow_same_cell = true;
    CHECK(extract_home_work(homebody, days_horizon(7), h3(), kRes, allow).accepted());
}

TEST_CASE("extraction does not depend on the order of days") {
    // Offices vary by day; swap whole weekdays around and compare.
    const int days = 14;
    const auto raw = textbook_commuter(days, {kOffice, kOffice, offset_km(kOffice, 3.0, 0.0)});
    std::vector<int> order(days);
    std::iota(order.begin(), order.end(), 0);
    // Permute within weekdays and within weekends separately so the calendar stays valid.
    std::vector<int> wd, we;
    for (int d : order) ((d % 7) < 5 ? wd : we).push_back(d);
    std::shuffle(wd.begin(), wd.end(), SplitMix64(9));
    std::shuffle(we.begin(), we.end(), SplitMix64(10));
    std::size_t iw = 0, ie = 0;
    for (int d = 0; d < days; ++d) order[static_cast<std::size_t>(d)] = (d % 7) < 5 ? wd[iw++] : we[ie++];

    RawTrajectory shuffled{"c", {}};
    const UtcSeconds m0 = monday_midnight();
    for (int d = 0; d < days; ++d) {
        const int src = order[static_cast<std::size_t>(d)];
        for (const auto& p : raw.points) {
            if (p.t >= m0 + src * kSecondsPerDay && p.t < m0 + (src + 1) * kSecondsPerDay) {
                shuffled.points.push_back({p.t + (d - src) * kSecondsPerDay, p.pos});
            }
        }
    }
    std::sort(shuffled.points.begin(), shuffled.points.end(),
              [](const auto& x, const auto& y) { return x.t < y.t; });
    HomeWorkOptions opt;
    opt.threshold = 0.5;
    const auto a = extract_home_work(raw, days_horizon(days), h3(), kRes, opt);
    const auto b = extract_home_work(shuffled, days_horizon(days), h3(), kRes, opt);
    CHECK(a.rejection == b.rejection);
    CHECK(a.candidate == b.candidate);
}

TEST_CASE("synthetic commuters are recovered") {
    const auto& city = testing::small_city(120, 14, 1.0, 21);
    const auto batch = extract_home_work_all(city.raw, city.horizon, h3(), kRes);
    std::size_t distinct = 0;
    for (const auto& p : city.profiles) distinct += h3().cell_of(p.home, kRes) != h3().cell_of(p.work, kRes);
    CHECK(batch.accepted.size() == distinct);
    for (const auto& hw : batch.accepted) {
        CHECK(hw.home_rate > 0.75);
        CHECK(hw.work_rate > 0.75);
    }
}

TEST_CASE("workplace heatmap") {
    const CellId w = h3().cell_of(kOffice, kRes);
    const CellId home = h3().cell_of(kHome, kRes);
    std::vector<HomeWork> three{{"a", home, w, 1, 1}, {"b", home, w, 1, 1}, {"c", home, w, 1, 1}};
    const auto m = workplace_heatmap(three, h3(), kRes);
    REQUIRE(m.size() == 1);
    CHECK(m.at(w) == 3);
    CHECK(workplace_heatmap({}, h3(), kRes).empty());
    CHECK_THROWS_AS(workplace_heatmap(three, h3(), geo::Resolution(9)), InvalidInput);

    const auto& city = testing::small_city();
    const auto batch = extract_home_work_all(city.raw, city.horizon, h3(), kRes);
    const auto fine = workplace_heatmap(batch.accepted, h3(), kRes);
    for (int level : {7, 5, 3}) {
        const auto coarse = workplace_heatmap(batch.accepted, h3(), geo::Resolution(level));
        std::map<CellId, std::size_t> summed;
        for (const auto& [c, n] : fine) summed[h3().parent_cell(c, geo::Resolution(level))] += n;
        CHECK(summed == coarse);
        std::size_t total = 0;
        for (const auto& [c, n] : coarse) total += n;
        CHECK(total == batch.accepted.size());
    }

    const auto& nobody = testing::small_city(60, 7, 0.0);
    const auto none = extract_home_work_all(nobody.raw, nobody.horizon, h3(), kRes);
    CHECK(workplace_heatmap(none.accepted, h3(), kRes).empty());
}

TEST_CASE("home/work CSV") {
    std::ostringstream out;
    write_home_work_csv(out, {{"a", CellId(0x88), CellId(0x99), 0.9, 0.8}});
    CHECK(out.str() == "uid,home_cell,work_cell,home_rate,work_rate\na,88,99,0.900000,0.800000\n");
}
