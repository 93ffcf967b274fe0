#include "epimob/error.hpp"
#include "epimob/policy/policy.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

using namespace epimob;
using namespace epimob::policy;
using epimob::mobility::GridTrajectory;
using epimob::mobility::HistoryIndex;
using epimob::mobility::offset_km;
using epimob::mobility::TrajectorySet;
using epimob::geo::LatLon;

namespace {

const geo::GridSystem& h3() {
    static auto g = geo::make_h3_grid();
    return *g;
}

const geo::Resolution kRes(8);
constexpr std::int64_t kTicksPerDay = kSecondsPerDay / 300;
const LatLon kHome{35.70, 139.70};
const LatLon kWork{35.68, 139.77};
const LatLon kElsewhere{35.66, 139.72};
const LatLon kMall{35.72, 139.75};

CellId cell(const LatLon& p) { return h3().cell_of(p, kRes); }

GeoPolygon square(const LatLon& c, double half_km) {
    return GeoPolygon({offset_km(c, -half_km, -half_km), offset_km(c, -half_km, half_km), offset_km(c, half_km, half_km),
                       offset_km(c, half_km, -half_km)});
}

// A polygon whose covering is exactly the cell holding p.
GeoPolygon around_cell(const LatLon& p) { return square(h3().cell_center(cell(p)), 0.1); }

Horizon week() { return local_days_horizon(parse_date("2012-07-02"), 7, 300, LocalClock{}); }

PolicyContext context(unsigned workers = 1) {
    PolicyContext ctx;
    ctx.grid = &h3();
    ctx.workers = workers;
    return ctx;
}

GridTrajectory constant(const std::string& uid, CellId c) {
    const Horizon h = week();
    return GridTrajectory{uid, h.start, h.step, std::vector<CellId>(static_cast<std::size_t>(h.ticks()), c), false};
}

// Puts the user in `c` for local hours [from_h, to_h) of day `day` (to_h may exceed 24).
void place(GridTrajectory& t, int day, double from_h, double to_h, CellId c) {
    const auto a = day * kTicksPerDay + static_cast<std::int64_t>(from_h * 12);
    const auto b = std::min<std::int64_t>(day * kTicksPerDay + static_cast<std::int64_t>(to_h * 12),
                                          static_cast<std::int64_t>(t.cells.size()));
    std::fill(t.cells.begin() + a, t.cells.begin() + b, c);
}

std::vector<CellId> day_cells(const GridTrajectory& t, std::int64_t day) {
    return {t.cells.begin() + day * kTicksPerDay, t.cells.begin() + (day + 1) * kTicksPerDay};
}

PolicySpec lockdown(const std::string& name, std::vector<GeoPolygon> polys, const std::string& start, int days) {
    PolicySpec p;
    p.kind = PolicyKind::lockdown;
    p.name = name;
    p.start = start;
    p.days = days;
    p.polygons = std::move(polys);
    return p;
}

PolicySpec telecommute(const std::string& name, GeoPolygon poly, double reduction, const std::string& start, int days) {
    PolicySpec p;
    p.kind = PolicyKind::telecommuting;
    p.name = name;
    p.start = start;
    p.days = days;
    p.regions.push_back({std::move(poly), "", reduction});
    return p;
}

PolicySpec screening(const std::string& name, std::vector<CellId> cells, const std::string& start, int days,
                     double prob = kDefaultDetectProb) {
    PolicySpec p;
    p.kind = PolicyKind::screening;
    p.name = name;
    p.start = start;
    p.days = days;
    p.cells = std::move(cells);
    p.detect_prob = prob;
    return p;
}

std::string field_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const InvalidInput& e) {
        return e.field();
    }
    return "<no error>";
}

// 100 workers in the target office, 10 elsewhere; weekdays 09-17 at work.
struct Office {
    TrajectorySet ts;
    std::vector<places::HomeWork> hw;
};

Office office_population() {
    std::vector<GridTrajectory> ts;
    Office o;
    for (int i = 0; i < 110; ++i) {
        char uid[16];
        std::snprintf(uid, sizeof uid, "w%03d", i);
        const CellId work = i < 100 ? cell(kWork) : cell(kElsewhere);
        auto t = constant(uid, cell(kHome));
        for (int d = 0; d < 5; ++d) place(t, d, 9, 17, work);
        ts.push_back(std::move(t));
        o.hw.push_back({uid, cell(kHome), work, 1.0, 1.0});
    }
    o.ts = TrajectorySet(week(), 8, std::move(ts));
    return o;
}

struct CityData {
    const mobility::SyntheticCity* city;
    std::vector<places::HomeWork> hw;
};

const CityData& city_data() {
    static const CityData data = [] {
        const auto& city = testing::small_city();
        return CityData{&city, places::extract_home_work_all(city.raw, city.horizon, h3(), kRes).accepted};
    }();
    return data;
}

} // namespace

TEST_CASE("policy documents round-trip and report field paths") {
    const auto lock = lockdown("ld", {around_cell(kWork)}, "2012-07-04", 2);
    auto tele = telecommute("tc", square(kWork, 1.0), 0.7, "2012-07-02", 5);
    tele.regions.push_back({std::nullopt, "Toshima", 0.3});
    const auto scr = screening("sc", {cell(kMall)}, "2012-07-03", 3, 0.5);
    for (const auto& p : {lock, tele, scr}) {
        CAPTURE(to_string(p.kind));
        const nlohmann::json j = p;
        CHECK(j.get<PolicySpec>() == p);
    }

    SUBCASE("screening defaults to 0.879") {
        nlohmann::json j = scr;
        j.erase("detect_prob");
        CHECK(j.get<PolicySpec>().detect_prob == doctest::Approx(0.879));
    }
    SUBCASE("errors") {
        nlohmann::json j = lock;
        j["kind"] = "curfew";
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/kind");
        j = lock;
        j["days"] = 0;
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/days");
        j = lock;
        j["start"] = "2012-13-01";
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/start");
        j = lock;
        j["polygons"] = nlohmann::json::array();
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/polygons");
        j = tele;
        j["regions"][0]["reduction"] = 1.5;
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/regions/0/reduction");
        j = tele;
        j["regions"][1].erase("district");
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/regions/1");
        j = scr;
        j["cells"][0] = "not-a-cell";
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/cells/0");
        j = scr;
        j["detect_prob"] = -0.1;
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/detect_prob");
        j = lock;
        j["polygons"][0] = {{35.0, 139.0}, {35.1, 139.1}, {35.0, 139.1}, {35.1, 139.0}};
        CHECK(field_of([&] { (void)j.get<PolicySpec>(); }) == "/polygons/0");
    }
    SUBCASE("range must sit inside the horizon") {
        const LocalClock clock;
        CHECK_NOTHROW(lockdown("a", {around_cell(kWork)}, "2012-07-02", 7).check_within(week(), clock));
        CHECK(field_of([&] { lockdown("a", {around_cell(kWork)}, "2012-07-02", 8).check_within(week(), clock); }) ==
              "/start");
        CHECK(field_of([&] { lockdown("a", {around_cell(kWork)}, "2012-07-01", 1).check_within(week(), clock); }) ==
              "/start");
        const auto p = lockdown("a", {around_cell(kWork)}, "2012-07-03", 2);
        CHECK(p.begin(clock) == testing::monday_midnight() + kSecondsPerDay);
        CHECK(p.end(clock) == testing::monday_midnight() + 3 * kSecondsPerDay);
    }
}

TEST_CASE("district tables resolve telecommuting regions") {
    const auto table = parse_district_table(nlohmann::json::parse(
        R"({"Chiyoda": [[35.67, 139.76], [35.67, 139.78], [35.69, 139.78], [35.69, 139.76]]})"));
    REQUIRE(table.count("Chiyoda") == 1);
    const auto o = office_population();
    PolicySpec p = telecommute("tc", square(kWork, 1.0), 1.0, "2012-07-02", 7);
    p.regions[0] = {std::nullopt, "Chiyoda", 1.0};
    PolicyContext ctx = context();
    CHECK(field_of([&] { (void)apply_telecommuting(o.ts, o.hw, p, ctx); }) == "/regions/0/district");
    ctx.districts = &table;
    CHECK(apply_telecommuting(o.ts, o.hw, p, ctx).affected.size() == 100);
    p.regions[0].district = "Shibuya";
    CHECK(field_of([&] { (void)apply_telecommuting(o.ts, o.hw, p, ctx); }) == "/regions/0/district");
    CHECK_THROWS_AS(parse_district_table(nlohmann::json::parse(R"({"x": [[35.0, 139.0]]})")), InvalidInput);
}

TEST_CASE("telecommuting samples exactly round(reduction * n) workers per region") {
    const auto o = office_population();
    const auto region = square(h3().cell_center(cell(kWork)), 0.1);

    SUBCASE("70 of 100") {
        const auto r = apply_telecommuting(o.ts, o.hw, telecommute("tc", region, 0.7, "2012-07-02", 7), context());
        REQUIRE(r.affected.size() == 70);
        CHECK(r.days_replaced == 70 * 5);
        const std::set<std::string> affected(r.affected.begin(), r.affected.end());
        for (std::size_t u = 0; u < o.ts.size(); ++u) {
            const auto& before = o.ts.at(u);
            const auto& after = r.trajectories.at(u);
            CAPTURE(before.uid);
            if (affected.count(before.uid)) {
                CHECK(before.uid < "w100");
                CHECK(std::all_of(after.cells.begin(), after.cells.end(), [](CellId c) { return c == cell(kHome); }));
            } else {
                CHECK(after == before);
            }
        }
        // Different seeds pick different workers but the same number.
        auto other = telecommute("tc", region, 0.7, "2012-07-02", 7);
        other.rng_seed = 99;
        const auto r2 = apply_telecommuting(o.ts, o.hw, other, context());
        CHECK(r2.affected.size() == 70);
        CHECK(r2.affected != r.affected);
        CHECK(apply_telecommuting(o.ts, o.hw, telecommute("tc", region, 0.7, "2012-07-02", 7), context(3)).affected ==
              r.affected);
    }
    SUBCASE("reduction 0 is the identity") {
        const auto r = apply_telecommuting(o.ts, o.hw, telecommute("tc", region, 0.0, "2012-07-02", 7), context());
        CHECK(r.affected.empty());
        CHECK(r.trajectories.trajectories() == o.ts.trajectories());
        CHECK(r.trajectories.dataset_id() == o.ts.dataset_id());
    }
    SUBCASE("reduction 1 keeps every worker home only within the range") {
        const auto r = apply_telecommuting(o.ts, o.hw, telecommute("tc", region, 1.0, "2012-07-03", 2), context());
        CHECK(r.affected.size() == 100);
        CHECK(r.days_replaced == 200);
        for (std::size_t u = 0; u < 100; ++u) {
            const auto& before = o.ts.at(u);
            const auto& after = r.trajectories.at(u);
            for (int d = 0; d < 7; ++d) {
                if (d == 1 || d == 2) {
                    CHECK(day_cells(after, d) == std::vector<CellId>(kTicksPerDay, cell(kHome)));
                } else {
                    CHECK(day_cells(after, d) == day_cells(before, d));
                }
            }
        }
    }
    SUBCASE("a visit shorter than an hour is not a working day") {
        std::vector<GridTrajectory> ts;
        auto t = constant("short", cell(kHome));
        place(t, 0, 12, 12.5, cell(kWork));
        place(t, 1, 9, 10, cell(kWork));
        ts.push_back(t);
        const TrajectorySet set(week(), 8, std::move(ts));
        const std::vector<places::HomeWork> hw{{"short", cell(kHome), cell(kWork), 1.0, 1.0}};
        const auto r = apply_telecommuting(set, hw, telecommute("tc", region, 1.0, "2012-07-02", 7), context());
        CHECK(r.days_replaced == 1);
        CHECK(day_cells(r.trajectories.at(0), 0) == day_cells(t, 0));
        CHECK(day_cells(r.trajectories.at(0), 1) == std::vector<CellId>(kTicksPerDay, cell(kHome)));
    }
    SUBCASE("a region that covers no cells only warns") {
        const GeoPolygon line({{35.0, 139.0}, {35.05, 139.05}, {35.1, 139.1}});
        const auto r = apply_telecommuting(o.ts, o.hw, telecommute("tc", line, 1.0, "2012-07-02", 7), context());
        CHECK(r.affected.empty());
        CHECK(r.warnings.size() == 1);
    }
}

TEST_CASE("telecommuting on the synthetic city matches a brute-force replay") {
    const auto& data = city_data();
    const auto& ts = data.city->trajectories;
    REQUIRE(data.hw.size() > 50);
    const auto r = apply_telecommuting(ts, data.hw, telecommute("all", square(data.city->spec.center, 25.0), 1.0,
                                                                "2012-07-02", 7),
                                       context());
    CHECK(r.affected.size() == data.hw.size());
    std::size_t replaced = 0;
    for (const auto& h : data.hw) {
        const auto u = *ts.find(h.uid);
        for (int d = 0; d < 7; ++d) {
            const auto before = day_cells(ts.at(u), d);
            const auto ticks_at_work = std::count(before.begin(), before.end(), h.work_cell);
            const auto after = day_cells(r.trajectories.at(u), d);
            if (ticks_at_work >= 12) {
                ++replaced;
                CHECK(after == std::vector<CellId>(kTicksPerDay, h.home_cell));
            } else {
                CHECK(after == before);
            }
        }
    }
    CHECK(replaced == r.days_replaced);
    CHECK(replaced > data.hw.size() * 4);
}

TEST_CASE("lockdown on a hand-built week") {
    const CellId home = cell(kHome);
    const CellId x = cell(kWork);
    const CellId y = cell(kMall);
    std::vector<GridTrajectory> ts;

    // a: inside the region when the lockdown starts.
    auto a = constant("a", home);
    place(a, 1, 20, 27, x);
    place(a, 5, 12, 14, x);
    // b: visits the region on the locked days only, the mall otherwise with distinct hours.
    auto b = constant("b", home);
    place(b, 0, 12, 14, y);
    place(b, 1, 13, 15, y);
    place(b, 2, 12, 14, x);
    place(b, 3, 12, 14, x);
    place(b, 4, 15, 16, y);
    place(b, 5, 8, 9, y);
    place(b, 6, 18, 21, y);
    // c: never near the region.
    auto c = constant("c", home);
    place(c, 2, 10, 12, y);
    // d: in the region every day.
    auto d = constant("d", home);
    for (int k = 0; k < 7; ++k) place(d, k, 12, 14, x);
    // e: like d, and crosses midnight into day 3 inside the region.
    auto e = d;
    e.uid = "e";
    place(e, 2, 23, 25, x);
    for (auto* t : {&a, &b, &c, &d, &e}) ts.push_back(*t);
    const TrajectorySet set(week(), 8, ts);
    const HistoryIndex index(set, LocalClock{});
    const auto spec = lockdown("ld", {around_cell(kWork)}, "2012-07-04", 2);
    REQUIRE(h3().cells_covering(spec.polygons[0], kRes) == std::vector<CellId>{x});

    const std::vector<places::HomeWork> hw{{"d", home, y, 1.0, 1.0}};
    const auto r = apply_lockdown(set, index, spec, context(), &hw);
    CHECK(r.frozen == std::vector<std::string>{"a"});
    CHECK(r.affected == std::vector<std::string>{"a", "b", "d", "e"});
    CHECK(r.days_replaced == 6);
    CHECK(r.fallback_days == 4);

    auto get = [&](const std::string& uid) { return r.trajectories.at(*r.trajectories.find(uid)); };
    // a frozen at x for days 2 and 3, untouched otherwise.
    CHECK(day_cells(get("a"), 2) == std::vector<CellId>(kTicksPerDay, x));
    CHECK(day_cells(get("a"), 3) == std::vector<CellId>(kTicksPerDay, x));
    for (int k : {0, 1, 4, 5, 6}) CHECK(day_cells(get("a"), k) == day_cells(a, k));
    // b's locked days are copies of its own clean days.
    for (int k : {2, 3}) {
        const auto got = day_cells(get("b"), k);
        bool matches = false;
        for (int src : {0, 1, 4, 5, 6}) matches = matches || got == day_cells(b, src);
        CHECK(matches);
    }
    CHECK(get("c") == c);
    // d has no clean day and a known home outside the region.
    CHECK(day_cells(get("d"), 2) == std::vector<CellId>(kTicksPerDay, home));
    CHECK(day_cells(get("d"), 3) == std::vector<CellId>(kTicksPerDay, home));
    // e's day 3 starts inside the region and its home is unknown: it holds the lockdown-start cell.
    CHECK(day_cells(get("e"), 2) == std::vector<CellId>(kTicksPerDay, home));
    CHECK(day_cells(get("e"), 3) == std::vector<CellId>(kTicksPerDay, home));

    SUBCASE("replacement draws are reproducible and seed dependent") {
        CHECK(apply_lockdown(set, index, spec, context(), &hw).trajectories.trajectories() ==
              r.trajectories.trajectories());
        std::set<std::vector<CellId>> seen;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            auto s = spec;
            s.rng_seed = seed;
            const auto rr = apply_lockdown(set, index, s, context(), &hw);
            seen.insert(day_cells(rr.trajectories.at(1), 2));
        }
        CHECK(seen.size() > 1);
        CHECK(seen.size() <= 5);
    }
    SUBCASE("regions that cover nothing leave everything as is") {
        const GeoPolygon line({{35.0, 139.0}, {35.05, 139.05}, {35.1, 139.1}});
        const auto rr = apply_lockdown(set, index, lockdown("ld", {line}, "2012-07-04", 2), context());
        CHECK(rr.affected.empty());
        CHECK(rr.warnings.size() == 1);
        CHECK(rr.trajectories.trajectories() == set.trajectories());
    }
    SUBCASE("mismatched index") {
        const HistoryIndex empty;
        CHECK_THROWS_AS(apply_lockdown(set, empty, spec, context()), InvalidInput);
    }
}

TEST_CASE("lockdown on the synthetic city keeps rerouted users out of the region") {
    const auto& data = city_data();
    const auto& ts = data.city->trajectories;
    const auto zone = data.city->work_zones.at(0);
    const auto spec = lockdown("zone0", {square(zone, 0.8)}, "2012-07-04", 2);
    const auto covered = h3().cells_covering(spec.polygons[0], kRes);
    const geo::CellSet locked(covered);
    REQUIRE(locked.size() >= 3);

    const HistoryIndex index(ts, LocalClock{});
    const auto r = apply_lockdown(ts, index, spec, context(), &data.hw);
    const std::set<std::string> frozen(r.frozen.begin(), r.frozen.end());
    const std::set<std::string> affected(r.affected.begin(), r.affected.end());
    CHECK(r.affected.size() > r.frozen.size());
    CHECK(r.affected.size() > 10);

    const std::int64_t k0 = 2 * kTicksPerDay;
    const std::int64_t k1 = 4 * kTicksPerDay;
    // Clean source days per user, found by scanning the raw cells.
    auto clean_days = [&](const GridTrajectory& t) {
        std::vector<std::vector<CellId>> out;
        for (int day = 0; day < 7; ++day) {
            const auto cells = day_cells(t, day);
            if (std::none_of(cells.begin(), cells.end(), [&](CellId c) { return locked.contains(c); }))
                out.push_back(cells);
        }
        return out;
    };

    std::size_t from_history = 0;
    for (std::size_t u = 0; u < ts.size(); ++u) {
        const auto& before = ts.at(u);
        const auto& after = r.trajectories.at(u);
        CAPTURE(before.uid);
        for (std::int64_t k = 0; k < ts.ticks(); ++k) {
            if (k < k0 || k >= k1) REQUIRE(after.cells[k] == before.cells[k]);
        }
        if (frozen.count(before.uid)) {
            CHECK(locked.contains(before.cells[k0]));
            CHECK(std::all_of(after.cells.begin() + k0, after.cells.begin() + k1,
                              [&](CellId c) { return c == before.cells[k0]; }));
            continue;
        }
        CHECK(std::none_of(after.cells.begin() + k0, after.cells.begin() + k1,
                           [&](CellId c) { return locked.contains(c); }));
        if (!affected.count(before.uid)) {
            CHECK(after == before);
            continue;
        }
        const auto sources = clean_days(before);
        for (int day : {2, 3}) {
            const auto got = day_cells(after, day);
            const auto orig = day_cells(before, day);
            if (got == orig) continue;
            if (!sources.empty()) {
                CHECK(std::find(sources.begin(), sources.end(), got) != sources.end());
                ++from_history;
            } else {
                CHECK(std::all_of(got.begin(), got.end(), [&](CellId c) { return c == got.front(); }));
            }
        }
    }
    CHECK(from_history > 0);

    const auto r3 = apply_lockdown(ts, index, spec, context(3), &data.hw);
    CHECK(r3.trajectories.dataset_id() == r.trajectories.dataset_id());
    CHECK(r3.affected == r.affected);
}

TEST_CASE("screening plans") {
    const LocalClock clock;
    const UtcSeconds m0 = testing::monday_midnight();
    const auto s1 = screening("s1", {cell(kMall), cell(kWork)}, "2012-07-03", 2);
    const auto plan = compile_screening(s1, week(), context());
    CHECK(plan.cells().size() == 2);
    CHECK(plan.detect_prob(cell(kMall), m0 + kSecondsPerDay) == doctest::Approx(0.879));
    CHECK(plan.detect_prob(cell(kMall), m0 + kSecondsPerDay - 1) == 0.0);
    CHECK(plan.detect_prob(cell(kMall), m0 + 3 * kSecondsPerDay - 1) == doctest::Approx(0.879));
    CHECK(plan.detect_prob(cell(kMall), m0 + 3 * kSecondsPerDay) == 0.0);
    CHECK(plan.detect_prob(cell(kHome), m0 + kSecondsPerDay) == 0.0);

    auto merged = plan;
    merged.merge(compile_screening(screening("s2", {cell(kMall)}, "2012-07-04", 3, 0.95), week(), context()));
    CHECK(merged.detect_prob(cell(kMall), m0 + kSecondsPerDay + 3600) == doctest::Approx(0.879));
    CHECK(merged.detect_prob(cell(kMall), m0 + 2 * kSecondsPerDay + 3600) == doctest::Approx(0.95));
    CHECK(merged.detect_prob(cell(kMall), m0 + 4 * kSecondsPerDay + 3600) == doctest::Approx(0.95));
    CHECK(merged.detect_prob(cell(kWork), m0 + 4 * kSecondsPerDay + 3600) == 0.0);

    auto twice = merged;
    twice.merge(merged);
    CHECK(twice == merged);

    const nlohmann::json j = merged;
    CHECK(j.get<ScreeningPlan>() == merged);

    CHECK(field_of([&] { (void)compile_screening(screening("bad", {CellId(12345)}, "2012-07-03", 1), week(), context()); }) ==
          "/cells/0");
    CHECK(field_of([&] { (void)compile_screening(screening("late", {cell(kMall)}, "2012-07-08", 2), week(), context()); }) ==
          "/start");
    (void)clock;
}

TEST_CASE("compose_plan") {
    const auto& data = city_data();
    const auto& ts = data.city->trajectories;
    const auto tele = telecommute("tc", square(data.city->spec.center, 25.0), 0.5, "2012-07-02", 5);
    const auto lock = lockdown("ld", {square(data.city->work_zones.at(1), 0.8)}, "2012-07-05", 2);
    const auto scr = screening("sc", {h3().cell_of(data.city->work_zones.at(0), kRes)}, "2012-07-03", 3);

    SUBCASE("telecommuting runs before lockdown whatever the listed order") {
        const auto plan = compose_plan(ts, {scr, lock, tele}, data.hw, context());
        REQUIRE(plan.provenance.size() == 3);
        CHECK(plan.provenance[0].kind == PolicyKind::telecommuting);
        CHECK(plan.provenance[1].kind == PolicyKind::lockdown);
        CHECK(plan.provenance[2].kind == PolicyKind::screening);

        const auto step1 = apply_telecommuting(ts, data.hw, tele, context());
        const HistoryIndex index(step1.trajectories, LocalClock{});
        const auto step2 = apply_lockdown(step1.trajectories, index, lock, context(), &data.hw);
        CHECK(plan.trajectories.dataset_id() == step2.trajectories.dataset_id());
        CHECK(plan.screening == compile_screening(scr, ts.horizon(), context()));

        const auto again = compose_plan(ts, {tele, lock, scr}, data.hw, context(2));
        CHECK(again.trajectories.dataset_id() == plan.trajectories.dataset_id());
    }
    SUBCASE("no policies") {
        const auto plan = compose_plan(ts, {}, data.hw, context());
        CHECK(plan.trajectories.dataset_id() == ts.dataset_id());
        CHECK(plan.screening.empty());
        CHECK(plan.provenance.empty());
    }
    SUBCASE("screening alone leaves mobility untouched") {
        const auto plan = compose_plan(ts, {scr}, data.hw, context());
        CHECK(plan.trajectories.dataset_id() == ts.dataset_id());
    }
    SUBCASE("names") {
        const auto plan = compose_plan(ts, {scr, scr}, data.hw, context());
        CHECK(plan.provenance.size() == 1);
        auto clash = scr;
        clash.detect_prob = 0.5;
        CHECK(field_of([&] { (void)compose_plan(ts, {scr, clash}, data.hw, context()); }) == "/policies/1/name");
    }
    SUBCASE("field paths carry the policy position") {
        auto bad = lock;
        bad.days = 0;
        CHECK(field_of([&] { (void)compose_plan(ts, {scr, bad}, data.hw, context()); }) == "/policies/1/days");
        auto late = tele;
        late.start = "2012-07-20";
        CHECK(field_of([&] { (void)compose_plan(ts, {late}, data.hw, context()); }) == "/policies/0/start");
    }
}
