#include "epimob/error.hpp"
#include "epimob/mobility/history_index.hpp"
#include "epimob/mobility/ingest.hpp"
#include "epimob/mobility/io.hpp"
#include "epimob/mobility/synthetic.hpp"
#include "epimob/rng.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <set>
#include <sstream>

using namespace epimob;
using namespace epimob::mobility;
using epimob::testing::small_city;

namespace {

const auto& h3() {
    static auto g = geo::make_h3_grid();
    return *g;
}

Horizon one_day() {
    return local_days_horizon(parse_date("2012-07-02"), 1, 300, LocalClock{});
}

std::string iso(UtcSeconds t) { return format_timestamp(t); }

} // namespace

TEST_CASE("ingest parses, sorts, dedupes and clips") {
    const Horizon h = one_day();
    std::ostringstream csv;
    csv << "uid,timestamp,lat,lon\n";
    csv << "b," << iso(h.start + 600) << ",35.68,139.76\n";
    csv << "a," << iso(h.start + 1200) << ",35.69,139.77\n";
    csv << "a," << iso(h.start) << ",35.68,139.76\n";
    csv << "b," << iso(h.start) << ",35.68,139.76\n";
    csv << "a," << iso(h.start + 600) << ",35.685,139.765\n";
    csv << "b," << iso(h.start + 1200) << ",35.68,139.76\n";
    csv << "b," << iso(h.start + 1200) << ",35.70,139.70\n"; // duplicate timestamp
    csv << "a," << iso(h.end + 10) << ",35.68,139.76\n";    // outside horizon
    std::istringstream in(csv.str());
    const auto rep = ingest_trajectories(in, h);
    REQUIRE(rep.trajectories.size() == 2);
    CHECK(rep.trajectories[0].uid == "a");
    CHECK(rep.trajectories[0].points.size() == 3);
    CHECK(rep.trajectories[1].points.size() == 3);
    CHECK(rep.rows_outside_horizon == 1);
    CHECK(rep.rows_duplicate == 1);
    for (const auto& t : rep.trajectories) {
        CHECK(std::is_sorted(t.points.begin(), t.points.end(),
                             [](const RawPoint& x, const RawPoint& y) { return x.t < y.t; }));
    }
    // The first of the duplicated rows wins.
    CHECK(rep.trajectories[1].points[2].pos.lat == doctest::Approx(35.68));
}

TEST_CASE("malformed rows name the line in strict mode and are counted in lenient mode") {
    const Horizon h = one_day();
    const std::string body = "uid,timestamp,lat,lon\nu1," + iso(h.start) + ",35.6,139.7\nu1," + iso(h.start + 300) +
                             ",999,139.7\nu1,notatime,35.6,139.7\n";
    {
        std::istringstream in(body);
        try {
            (void)ingest_trajectories(in, h);
            FAIL("expected an error");
        } catch (const InvalidInput& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    std::istringstream in(body);
    const auto rep = ingest_trajectories(in, h, IngestOptions{true});
    CHECK(rep.rows_skipped == 2);
    CHECK(rep.errors.size() == 2);
    CHECK(rep.trajectories.size() == 1);

    std::istringstream bad_header("user,time,lat,lon\n");
    CHECK_THROWS_AS(ingest_trajectories(bad_header, h), InvalidInput);
}

TEST_CASE("interpolation") {
    const Horizon h = one_day();
    const geo::Resolution r(8);
    const LatLon p{35.6812, 139.7671};

    SUBCASE("a stationary user maps to one cell for the whole horizon") {
        RawTrajectory raw{"u", {{h.start + 3600, p}}};
        const auto g = interpolate_and_map(raw, h, r, h3());
        CHECK(g.cells.size() == static_cast<std::size_t>(h.ticks()));
        CHECK(std::all_of(g.cells.begin(), g.cells.end(), [&](CellId c) { return c == h3().cell_of(p, r); }));
        CHECK(static_cast<UtcSeconds>(g.cells.size()) * g.step == h.end - h.start);
    }

    SUBCASE("two observations 10 min apart give one midpoint") {
        const LatLon q = offset_km(p, 0.0, 3.0);
        const LatLon mid{(p.lat + q.lat) / 2, (p.lon + q.lon) / 2};
        RawTrajectory raw{"u", {{h.start, p}, {h.start + 600, q}}};
        const auto g = interpolate_and_map(raw, h, r, h3());
        CHECK(g.cells[0] == h3().cell_of(p, r));
        CHECK(g.cells[1] == h3().cell_of(mid, r));
        CHECK(g.cells[2] == h3().cell_of(q, r));
        CHECK(g.cells.back() == h3().cell_of(q, r));
    }

    SUBCASE("a straight move crosses cells in order") {
        const LatLon q = offset_km(p, 0.3, 2.0);
        RawTrajectory raw{"u", {{h.start + 3600, p}, {h.start + 3600 + 1800, q}}};
        const auto g = interpolate_and_map(raw, h, r, h3());
        std::vector<CellId> expected;
        for (std::int64_t k = 0; k < h.ticks(); ++k) {
            const UtcSeconds t = h.tick_time(k);
            double f = std::clamp(static_cast<double>(t - (h.start + 3600)) / 1800.0, 0.0, 1.0);
            expected.push_back(h3().cell_of({p.lat + f * (q.lat - p.lat), p.lon + f * (q.lon - p.lon)}, r));
        }
        CHECK(g.cells == expected);
        std::vector<CellId> distinct;
        for (CellId c : g.cells)
            if (distinct.empty() || distinct.back() != c) distinct.push_back(c);
        CHECK(distinct.size() >= 3);
    }

    SUBCASE("empty after clipping is rejected") {
        RawTrajectory raw{"u", {{h.end + 100, p}}};
        CHECK_THROWS_AS(interpolate_and_map(raw, h, r, h3()), InvalidInput);
        const auto rep = build_trajectory_set({raw}, h, r, h3());
        CHECK(rep.trajectories.empty());
        REQUIRE(rep.rejected.size() == 1);
        CHECK(rep.rejected[0].first == "u");
    }

    SUBCASE("long gaps are flagged and optionally dropped") {
        RawTrajectory raw{"u", {{h.start, p}, {h.start + 7 * 3600, p}}};
        CHECK(interpolate_and_map(raw, h, r, h3()).long_gap);
        BuildOptions opt;
        opt.drop_long_gap_users = true;
        CHECK(build_trajectory_set({raw}, h, r, h3(), opt).trajectories.empty());
    }
}

TEST_CASE("mapping at step then subsampling equals mapping at twice the step") {
    const auto& city = small_city();
    const Horizon h = city.horizon;
    const Horizon h2{h.start, h.end, h.step * 2};
    for (std::size_t u = 0; u < 20; ++u) {
        const auto fine = interpolate_and_map(city.raw[u], h, geo::Resolution(8), h3());
        const auto coarse = interpolate_and_map(city.raw[u], h2, geo::Resolution(8), h3());
        REQUIRE(coarse.cells.size() * 2 == fine.cells.size());
        for (std::size_t k = 0; k < coarse.cells.size(); ++k) CHECK(coarse.cells[k] == fine.cells[2 * k]);
    }
}

TEST_CASE("dataset id ignores input row order") {
    const auto& city = small_city();
    std::ostringstream csv;
    write_raw_csv(csv, {city.raw.begin(), city.raw.begin() + 10});
    std::string text = csv.str();
    std::vector<std::string> rows;
    std::istringstream lines(text);
    std::string header;
    std::getline(lines, header);
    for (std::string l; std::getline(lines, l);) rows.push_back(l);
    std::shuffle(rows.begin(), rows.end(), SplitMix64(3));
    std::ostringstream shuffled;
    shuffled << header << '\n';
    for (const auto& l : rows) shuffled << l << '\n';

    auto build = [&](const std::string& s) {
        std::istringstream in(s);
        auto rep = ingest_trajectories(in, city.horizon);
        return build_trajectory_set(rep.trajectories, city.horizon, geo::Resolution(8), h3()).trajectories.dataset_id();
    };
    const auto a = build(text);
    CHECK(a == build(shuffled.str()));
    CHECK(a.rfind("ds-", 0) == 0);
}

TEST_CASE("trajectory set invariants") {
    const Horizon h = one_day();
    GridTrajectory a{"a", h.start, h.step, std::vector<CellId>(static_cast<std::size_t>(h.ticks()), CellId(1)), false};
    GridTrajectory short_one = a;
    short_one.uid = "b";
    short_one.cells.pop_back();
    CHECK_THROWS_AS(TrajectorySet(h, 8, {a, short_one}), InvalidInput);
    CHECK_THROWS_AS(TrajectorySet(h, 8, {a, a}), InvalidInput);
    GridTrajectory b = a;
    b.uid = "0b";
    const TrajectorySet ts(h, 8, {a, b});
    CHECK(ts.at(0).uid == "0b");
    CHECK(ts.find("a") == std::optional<std::size_t>(1));
    CHECK_FALSE(ts.find("zz"));
}

TEST_CASE("grid JSONL round trip") {
    const auto& ts = small_city().trajectories;
    std::stringstream buf;
    write_grid_jsonl(buf, ts);
    std::string first;
    {
        std::istringstream peek(buf.str());
        std::getline(peek, first);
    }
    const auto j = nlohmann::json::parse(first);
    CHECK(j["step"] == 300);
    CHECK(j["cells"][0].get<std::string>() == ts.at(0).cells[0].to_hex());
    const auto back = read_grid_jsonl(buf, 8);
    CHECK(back.dataset_id() == ts.dataset_id());
    CHECK(back.trajectories() == ts.trajectories());
}

TEST_CASE("synthetic city") {
    SyntheticCitySpec spec;
    spec.n_users = 40;
    spec.days = 3;
    spec.rng_seed = 1;

    SUBCASE("deterministic under the seed") {
        const auto a = generate_synthetic_city(spec, h3());
        const auto b = generate_synthetic_city(spec, h3());
        CHECK(a.trajectories.dataset_id() == b.trajectories.dataset_id());
        std::ostringstream sa, sb;
        write_grid_jsonl(sa, a.trajectories);
        write_grid_jsonl(sb, b.trajectories);
        CHECK(sa.str() == sb.str());
        spec.rng_seed = 2;
        CHECK(generate_synthetic_city(spec, h3()).trajectories.dataset_id() != a.trajectories.dataset_id());
    }

    SUBCASE("trajectories satisfy the grid invariants") {
        const auto city = generate_synthetic_city(spec, h3());
        CHECK(city.trajectories.size() == 40);
        for (const auto& t : city.trajectories.trajectories()) {
            CHECK(static_cast<UtcSeconds>(t.cells.size()) * t.step == city.horizon.end - city.horizon.start);
            CHECK_FALSE(t.long_gap);
        }
        for (const auto& r : city.raw) {
            CHECK(r.points.size() >= 2);
            for (std::size_t i = 1; i < r.points.size(); ++i) CHECK(r.points[i - 1].t < r.points[i].t);
        }
    }

    SUBCASE("commuters arrive between 09:00 and 11:00 on weekdays") {
        spec.commute_share = 1.0;
        const auto city = generate_synthetic_city(spec, h3());
        const auto clock = city.clock;
        for (std::size_t u = 0; u < city.profiles.size(); ++u) {
            const auto& prof = city.profiles[u];
            const auto work = h3().cell_of(prof.work, geo::Resolution(8));
            const auto home = h3().cell_of(prof.home, geo::Resolution(8));
            if (work == home) continue;
            const auto& cells = city.trajectories.at(*city.trajectories.find(prof.uid)).cells;
            for (std::int64_t k = 0; k < city.horizon.ticks(); ++k) {
                const int sod = clock.seconds_of_day(city.horizon.tick_time(k));
                if (sod >= 11 * 3600 && sod < 17 * 3600) CHECK(cells[static_cast<std::size_t>(k)] == work);
                if (sod < 6 * 3600) CHECK(cells[static_cast<std::size_t>(k)] == home);
            }
        }
    }

    SUBCASE("validation and JSON") {
        spec.n_users = 0;
        CHECK_THROWS_AS(generate_synthetic_city(spec, h3()), InvalidInput);
        spec.n_users = 5;
        spec.commute_share = 1.5;
        CHECK_THROWS_AS(spec.validate(), InvalidInput);
        spec.commute_share = 0.4;
        nlohmann::json j = spec;
        const auto back = j.get<SyntheticCitySpec>();
        CHECK(nlohmann::json(back) == j);
        CHECK_THROWS_AS(nlohmann::json::parse(R"({"n_users": 0})").get<SyntheticCitySpec>(), InvalidInput);
    }
}

TEST_CASE("history index matches brute force") {
    const auto& city = small_city(80, 7);
    const auto& ts = city.trajectories;
    const HistoryIndex idx(ts, city.clock);
    CHECK(idx.calendar().size() == 7);

    for (std::uint32_t u = 0; u < ts.size(); ++u) {
        for (std::uint32_t d = 0; d < idx.calendar().size(); ++d) {
            const auto& slice = idx.calendar()[d];
            std::set<CellId> brute(ts.at(u).cells.begin() + slice.begin_tick, ts.at(u).cells.begin() + slice.end_tick);
            const auto got = idx.visited(u, d);
            CHECK(std::vector<CellId>(got.begin(), got.end()) == std::vector<CellId>(brute.begin(), brute.end()));
        }
    }

    // Days avoiding a set: compare against a scan for a few sets.
    std::vector<CellId> popular;
    for (std::uint32_t u = 0; u < 10; ++u) popular.push_back(ts.at(u).cells[150]);
    for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{3}, std::size_t{10}}) {
        const geo::CellSet L(std::vector<CellId>(popular.begin(), popular.begin() + static_cast<std::ptrdiff_t>(n)));
        std::set<UserDay> brute_visits;
        for (std::uint32_t u = 0; u < ts.size(); ++u) {
            std::vector<std::uint32_t> brute;
            for (std::uint32_t d = 0; d < idx.calendar().size(); ++d) {
                const auto& slice = idx.calendar()[d];
                bool hit = false;
                for (auto k = slice.begin_tick; k < slice.end_tick; ++k)
                    hit = hit || L.contains(ts.at(u).cells[static_cast<std::size_t>(k)]);
                if (!hit) brute.push_back(d);
                if (hit) brute_visits.insert({u, d});
            }
            CHECK(idx.days_avoiding(u, L) == brute);
        }
        const auto v = idx.visiting(L);
        CHECK(std::vector<UserDay>(brute_visits.begin(), brute_visits.end()) == v);
    }
}

TEST_CASE("day slices follow local midnight") {
    const LocalClock clock;
    const Horizon h{one_day().start + 6 * 3600, one_day().start + 2 * kSecondsPerDay, 300};
    const auto days = day_slices(h, clock);
    REQUIRE(days.size() == 2);
    CHECK_FALSE(days[0].full);
    CHECK(days[0].length() == 18 * 12);
    CHECK(days[1].full);
    CHECK(days[1].length() == 288);
}
