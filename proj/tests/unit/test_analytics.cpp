#include "epimob/analytics/analytics.hpp"
#include "epimob/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

using namespace epimob;
using namespace epimob::analytics;
using engine::EnsembleResult;
using engine::InfectionEvent;

namespace {

const geo::GridSystem& h3() {
    static auto g = geo::make_h3_grid();
    return *g;
}

const LocalClock kClock;
const UtcSeconds kMonday = testing::monday_midnight();

EpidemicParams params_with(double beta, int i0) {
    EpidemicParams p;
    p.beta_global = beta;
    p.i0 = i0;
    return p;
}

// A result holding one kept run with the given events.
EnsembleResult with_events(std::vector<InfectionEvent> events) {
    EnsembleResult r;
    r.horizon = local_days_horizon(parse_date("2012-07-02"), 7, 300, kClock);
    r.population = 10;
    engine::SimulationRun run;
    run.events = std::move(events);
    for (int d = 0; d < 7; ++d)
        run.daily.push_back({kClock.local_day(r.horizon.start) + d, 0, 0, 0, 0, static_cast<double>(run.events.size()), 0});
    r.runs = {run, run};
    engine::summarize(r);
    return r;
}

CellId tokyo8() { return h3().cell_of({35.6812, 139.7671}, geo::Resolution(8)); }

const EnsembleResult& city_result() {
    static const EnsembleResult r = [] {
        const auto& city = testing::small_city();
        const auto mob = engine::Mobility::compile(city.trajectories, city.clock);
        auto p = params_with(4.0, 15);
        return engine::run_ensemble(mob, risk::RiskField::uniform(4.0), p, {}, 40);
    }();
    return r;
}

EnsembleResult static_ensemble(double beta, std::size_t n, int days, int m) {
    const Horizon h = local_days_horizon(parse_date("2012-07-02"), days, 300, kClock);
    std::vector<mobility::GridTrajectory> ts;
    for (std::size_t i = 0; i < n; ++i)
        ts.push_back({"u" + std::to_string(1000 + i), h.start, h.step,
                      std::vector<CellId>(static_cast<std::size_t>(h.ticks()), tokyo8()), false});
    const auto mob = engine::Mobility::compile(mobility::TrajectorySet(h, 8, std::move(ts)), kClock);
    return engine::run_ensemble(mob, risk::RiskField::uniform(beta), params_with(beta, 5), {}, m);
}

} // namespace

TEST_CASE("cumulative curve") {
    SUBCASE("identical runs collapse the band") {
        const auto r = with_events({{"a", kMonday + 3600, tokyo8(), 0}});
        const auto c = cumulative_curve(r, "flat", {"beta 0"});
        REQUIRE(c.points.size() == 7);
        for (const auto& p : c.points) {
            CHECK(p.lo == p.mean);
            CHECK(p.hi == p.mean);
        }
        const nlohmann::json j = c;
        CHECK(j["points"][6]["date"] == "2012-07-08");
        CHECK(j["points"][0].contains("mean"));
        CHECK(j["points"][0].contains("lo"));
        CHECK(j["points"][0].contains("hi"));
        CHECK(j.get<CurveSeries>() == c);
    }
    SUBCASE("no kept runs") {
        EnsembleResult empty;
        CHECK_THROWS_AS(cumulative_curve(empty), InvalidInput);
    }
    SUBCASE("city curve is ordered and non-decreasing") {
        const auto c = cumulative_curve(city_result());
        for (std::size_t d = 0; d < c.points.size(); ++d) {
            CHECK(c.points[d].lo <= c.points[d].mean);
            CHECK(c.points[d].mean <= c.points[d].hi);
            if (d > 0) CHECK(c.points[d].mean >= c.points[d - 1].mean);
        }
    }
    SUBCASE("recomputing from the daily CSV reproduces the curve exactly") {
        const auto& r = city_result();
        std::ostringstream csv;
        engine::write_daily_csv(csv, r);
        std::istringstream in(csv.str());
        std::string line;
        std::getline(in, line);
        std::map<std::size_t, std::vector<double>> cum_by_run; // run -> per-day cum
        while (std::getline(in, line)) {
            std::vector<std::string> f;
            std::stringstream ls(line);
            for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
            REQUIRE(f.size() == 7);
            cum_by_run[std::stoul(f[0])].push_back(std::stod(f[6]));
        }
        std::vector<double> totals;
        for (const auto& [run, cum] : cum_by_run) totals.push_back(cum.back());
        std::sort(totals.begin(), totals.end());
        const double last = static_cast<double>(totals.size() - 1);
        const double lo = totals[static_cast<std::size_t>(std::floor(0.025 * last))];
        const double hi = totals[static_cast<std::size_t>(std::ceil(0.975 * last))];
        std::vector<std::size_t> kept;
        for (const auto& [run, cum] : cum_by_run)
            if (cum.back() >= lo && cum.back() <= hi) kept.push_back(run);
        CHECK(kept == r.kept);
        const auto curve = cumulative_curve(r);
        for (std::size_t d = 0; d < curve.points.size(); ++d) {
            std::vector<double> xs;
            double sum = 0;
            for (auto k : kept) {
                xs.push_back(cum_by_run[k][d]);
                sum += cum_by_run[k][d];
            }
            const double mean = sum / static_cast<double>(xs.size());
            CHECK(curve.points[d].mean == mean);
            CHECK(curve.points[d].lo == std::min(testing::percentile(xs, 0.025), mean));
            CHECK(curve.points[d].hi == std::max(testing::percentile(xs, 0.975), mean));
        }
    }
}

TEST_CASE("severity clusters") {
    SUBCASE("one event is one cluster at every resolution") {
        const auto r = with_events({{"a", kMonday + 3600, tokyo8(), 0}});
        for (int res = 8; res >= 0; --res) {
            const auto cl = severity_clusters(r, h3(), geo::Resolution(res));
            REQUIRE(cl.size() == 1);
            CHECK(cl[0].count == 2); // the event appears in both kept runs
            CHECK(h3().resolution_of(cl[0].cell).level() == res);
        }
        const auto payload = severity_payload(severity_clusters(r, h3(), geo::Resolution(8)), r, h3(),
                                              geo::Resolution(8), true);
        CHECK(payload["per_run"] == true);
        CHECK(payload["clusters"][0]["value"].get<double>() == 1.0);
        CHECK(payload["clusters"][0]["count"] == 2);
        CHECK(payload["clusters"][0]["polygon"]["type"] == "Polygon");
        const auto& ring = payload["clusters"][0]["polygon"]["coordinates"][0];
        CHECK(ring.size() >= 7);
        CHECK(ring.front() == ring.back());
    }
    SUBCASE("finer than the simulation") {
        const auto r = with_events({});
        try {
            (void)severity_clusters(r, h3(), geo::Resolution(9));
            FAIL("expected an error");
        } catch (const InvalidInput& e) {
            CHECK(e.field() == "res");
        }
        CHECK(severity_clusters(r, h3(), geo::Resolution(8)).empty());
    }
    SUBCASE("mass is conserved across resolutions") {
        const auto& r = city_result();
        std::size_t events = 0;
        for (const auto* run : r.kept_runs()) events += run->events.size();
        REQUIRE(events > 0);
        const auto fine = severity_clusters(r, h3(), geo::Resolution(8));
        for (int res = 8; res >= 3; --res) {
            const auto cl = severity_clusters(r, h3(), geo::Resolution(res));
            std::size_t sum = 0;
            for (const auto& c : cl) sum += c.count;
            CHECK(sum == events);
            // Children summed up equal the direct aggregation.
            std::map<CellId, std::size_t> up;
            for (const auto& c : fine)
                up[res == 8 ? c.cell : h3().parent_cell(c.cell, geo::Resolution(res))] += c.count;
            std::map<CellId, std::size_t> direct;
            for (const auto& c : cl) direct[c.cell] = c.count;
            CHECK(up == direct);
        }
        const auto payload = severity_payload(fine, r, h3(), geo::Resolution(8));
        CHECK(payload["total"] == events);
        std::set<std::string> colors;
        for (const auto& c : fine) colors.insert(c.color);
        CHECK(colors.count("red") == 1);
    }
}

TEST_CASE("hourly histogram") {
    const CellId c = tokyo8();
    SUBCASE("all events at 13:00") {
        const auto r = with_events({{"a", kMonday + 13 * 3600, c, 0}, {"b", kMonday + 13 * 3600 + 1200, c, 0}});
        const auto h = hourly_histogram(r, h3(), {c});
        CHECK(h.total == 4);
        for (int k = 0; k < 24; ++k) CHECK(h.percent[k] == (k == 13 ? 100.0 : 0.0));
    }
    SUBCASE("uniform events give 100/24 per bin") {
        std::vector<InfectionEvent> events;
        for (int k = 0; k < 24 * 5; ++k) events.push_back({"u", kMonday + (k % 24) * 3600 + 600 * (k / 24), c, 0});
        const auto h = hourly_histogram(with_events(events), h3(), {h3().parent_cell(c, geo::Resolution(5))});
        for (double v : h.percent) CHECK(v == doctest::Approx(100.0 / 24.0));
    }
    SUBCASE("no data and bad regions") {
        const auto r = with_events({{"a", kMonday, c, 0}});
        const CellId far = h3().cell_of({35.9, 139.3}, geo::Resolution(8));
        const auto h = hourly_histogram(r, h3(), {far});
        CHECK(h.no_data());
        for (double v : h.percent) CHECK(v == 0.0);
        CHECK(nlohmann::json(h)["no_data"] == true);
        CHECK_THROWS_AS(hourly_histogram(r, h3(), {}), InvalidInput);
        CHECK_THROWS_AS(hourly_histogram(r, h3(), {h3().cell_of({35.9, 139.3}, geo::Resolution(9))}), InvalidInput);
    }
    SUBCASE("bins sum to 100 for every severity cluster") {
        const auto& r = city_result();
        for (int res : {8, 6}) {
            for (const auto& cl : severity_clusters(r, h3(), geo::Resolution(res))) {
                const auto h = hourly_histogram(r, h3(), {cl.cell});
                CHECK(h.total == cl.count);
                CHECK(std::abs(std::accumulate(h.percent.begin(), h.percent.end(), 0.0) - 100.0) <= 1e-9);
            }
        }
    }
}

TEST_CASE("compare_policies") {
    const auto& r = city_result();
    SUBCASE("a result against itself ties") {
        const auto c = compare_policies({{"a", &r, {}}, {"b", &r, {}}}, "self");
        REQUIRE(c.curves.size() == 2);
        CHECK(c.curves[0].points == c.curves[1].points);
        CHECK(c.ranking[0].rank == 1);
        CHECK(c.ranking[1].rank == 1);
        const nlohmann::json j = c;
        CHECK(j["curves"].size() == 2);
        CHECK(j["name"] == "self");
    }
    SUBCASE("higher beta ranks worse") {
        const auto low = static_ensemble(0.2, 300, 14, 20);
        const auto high = static_ensemble(0.4, 300, 14, 20);
        const auto c = compare_policies({{"high", &high, {}}, {"low", &low, {}}}, "beta");
        CHECK(c.ranking[0].name == "low");
        CHECK(c.ranking[0].rank == 1);
        CHECK(c.ranking[1].name == "high");
        CHECK(c.ranking[1].rank == 2);
        CHECK(c.ranking[0].final_mean < c.ranking[1].final_mean);
    }
    SUBCASE("incomparable inputs") {
        const auto shorter = static_ensemble(0.3, 150, 5, 2);
        auto field_of = [](const std::vector<NamedResult>& in) {
            try {
                (void)compare_policies(in, "x");
            } catch (const InvalidInput& e) {
                return e.field();
            }
            return std::string("<no error>");
        };
        CHECK(field_of({{"a", &r, {}}, {"b", &shorter, {}}}) == "horizon");
        auto other = r;
        other.population += 1;
        CHECK(field_of({{"a", &r, {}}, {"b", &other, {}}}) == "population");
        CHECK(field_of({{"a", &r, {}}}) == "job_ids");
    }
}

TEST_CASE("config clips") {
    policy::PolicySpec tc;
    tc.kind = policy::PolicyKind::telecommuting;
    tc.name = "t";
    tc.start = "2012-07-02";
    tc.days = 5;
    tc.regions.push_back({std::nullopt, "Toshima", 0.7});
    const auto clips = config_clips(EpidemicParams{}, {tc});
    CHECK(clips[0] == "beta 0.302");
    CHECK(clips.back() == "telecommuting t 2012-07-02 +5d Toshima 70%");
}
