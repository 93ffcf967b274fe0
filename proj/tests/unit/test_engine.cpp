#include "epimob/engine/ensemble.hpp"
#include "epimob/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace epimob;
using namespace epimob::engine;
using epimob::mobility::GridTrajectory;
using epimob::mobility::TrajectorySet;

namespace {

const geo::GridSystem& h3() {
    static auto g = geo::make_h3_grid();
    return *g;
}

CellId cell_n(int k) { return h3().cell_of(mobility::offset_km({35.68, 139.76}, 0.0, 1.5 * k), geo::Resolution(8)); }

Horizon days_horizon(int days, int step = 300) {
    return local_days_horizon(parse_date("2012-07-02"), days, step, LocalClock{});
}

char* uid_buf(char (&buf)[16], std::size_t i) {
    std::snprintf(buf, sizeof buf, "u%04zu", i);
    return buf;
}

// Everyone in cell 0 for the whole horizon.
TrajectorySet static_population(std::size_t n, int days, int step = 300) {
    const Horizon h = days_horizon(days, step);
    std::vector<GridTrajectory> ts;
    char buf[16];
    for (std::size_t i = 0; i < n; ++i)
        ts.push_back({uid_buf(buf, i), h.start, h.step, std::vector<CellId>(static_cast<std::size_t>(h.ticks()), cell_n(0)), false});
    return TrajectorySet(h, 8, std::move(ts));
}

EpidemicParams params_with(double beta, double sigma, double gamma, int i0, int step = 300) {
    EpidemicParams p;
    p.beta_global = beta;
    p.sigma = sigma;
    p.gamma = gamma;
    p.i0 = i0;
    p.step = step;
    return p;
}

const policy::ScreeningPlan kNoScreening;

std::uint32_t user_of(const Mobility& mob, const std::string& uid) {
    for (std::uint32_t u = 0; u < mob.users(); ++u)
        if (mob.uid(u) == uid) return u;
    throw std::out_of_range(uid);
}

} // namespace

TEST_CASE("Mobility keeps only cell changes") {
    const Horizon h = days_horizon(1);
    auto a = GridTrajectory{"a", h.start, h.step, std::vector<CellId>(288, cell_n(0)), false};
    auto b = a;
    b.uid = "b";
    std::fill(b.cells.begin() + 100, b.cells.begin() + 150, cell_n(1));
    const TrajectorySet ts(h, 8, {a, b});
    const auto mob = Mobility::compile(ts, LocalClock{});
    CHECK(mob.users() == 2);
    CHECK(mob.cells() == 2);
    CHECK(mob.calendar().size() == 1);
    REQUIRE(mob.dense(cell_n(1)).has_value());
    CHECK(mob.cell(*mob.dense(cell_n(1))) == cell_n(1));
    CHECK_FALSE(mob.dense(cell_n(5)).has_value());
    std::size_t total = 0;
    for (std::int64_t t = 0; t < mob.ticks(); ++t) total += mob.moves_at(t).size();
    CHECK(total == 2);
    REQUIRE(mob.moves_at(100).size() == 1);
    CHECK(mob.moves_at(100)[0].user == 1);
    CHECK(mob.moves_at(100)[0].to == *mob.dense(cell_n(1)));
    CHECK(mob.moves_at(150)[0].to == *mob.dense(cell_n(0)));
}

TEST_CASE("init_state") {
    const auto mob = Mobility::compile(static_population(50, 1), LocalClock{});
    SUBCASE("I0 equal to the population infects everyone") {
        const auto s = init_state(mob, params_with(0.3, 0.2, 0.1, 50), 1);
        CHECK(s.total(Compartment::I) == 50);
        CHECK(s.total(Compartment::S) == 0);
    }
    SUBCASE("same seed, same initial set; other seed, other set") {
        auto infected = [&](std::uint64_t seed) {
            const auto s = init_state(mob, params_with(0.3, 0.2, 0.1, 10), seed);
            std::set<std::uint32_t> out;
            for (std::uint32_t u = 0; u < 50; ++u)
                if (s.compartment(u) == Compartment::I) out.insert(u);
            return out;
        };
        CHECK(infected(7).size() == 10);
        CHECK(infected(7) == infected(7));
        CHECK(infected(7) != infected(8));
    }
    SUBCASE("bad I0") {
        CHECK_THROWS_AS(init_state(mob, params_with(0.3, 0.2, 0.1, 0), 1), InvalidInput);
        try {
            (void)init_state(mob, params_with(0.3, 0.2, 0.1, 51), 1);
            FAIL("expected an error");
        } catch (const InvalidInput& e) {
            CHECK(e.field() == "/params/i0");
        }
    }
}

TEST_CASE("sample_discrete_increment") {
    SplitMix64 rng(1);
    for (int k = 0; k < 1000; ++k) {
        CHECK(sample_discrete_increment(0.0, rng) == 0);
        CHECK(sample_discrete_increment(2.0, rng) == 2);
    }
    CHECK_THROWS_AS(sample_discrete_increment(-0.1, rng), InvalidInput);
    CHECK_THROWS_AS(sample_discrete_increment(std::nan(""), rng), InvalidInput);

    // The mean over 10^6 draws stays within 3 standard errors of x.
    for (double x : {0.001, 0.3, 1.7}) {
        CAPTURE(x);
        constexpr int kDraws = 1000000;
        double sum = 0.0;
        for (int k = 0; k < kDraws; ++k) sum += static_cast<double>(sample_discrete_increment(x, rng));
        const double f = x - std::floor(x);
        const double se = std::sqrt(f * (1.0 - f) / kDraws);
        CHECK(std::abs(sum / kDraws - x) <= 3.0 * se);
    }
}

TEST_CASE("seir increments") {
    const auto day = params_with(0.302, 0.2, 0.1, 1, 86400);
    const auto inc = seir_increments(99, 0, 1, 100, 0.302, day);
    CHECK(inc.to_e == doctest::Approx(0.302 * 99 * 1 / 100.0).epsilon(1e-12));
    CHECK(inc.to_e == doctest::Approx(0.29898).epsilon(1e-12));
    CHECK(seir_increments(0, 10, 0, 10, 0.302, day).to_i == 2.0);
    CHECK(seir_increments(50, 0, 0, 50, 0.302, day).to_e == 0.0);
    // Per-step rates scale with the step.
    const auto five = params_with(0.302, 0.2, 0.1, 1, 300);
    CHECK(seir_increments(99, 0, 1, 100, 0.302, five).to_e == doctest::Approx(0.29898 / 288).epsilon(1e-12));
}

TEST_CASE("contagion_step") {
    const auto ts = static_population(100, 1, 86400);
    const auto mob = Mobility::compile(ts, LocalClock{});
    const auto day = params_with(0.302, 0.2, 0.1, 1, 86400);
    std::vector<InfectionEvent> events;
    const StepContext ctx{&mob, 0, 3, &events};

    SUBCASE("no infectious users, no exposures") {
        EpidemicState s(mob);
        for (std::uint32_t u = 0; u < 10; ++u) s.set_compartment(u, Compartment::E);
        SplitMix64 rng(1);
        const auto tr = contagion_step(s, 0, 5.0, day, rng, ctx);
        CHECK(tr.to_e == 0);
        CHECK(tr.to_i == 2);
        CHECK(s.total(Compartment::E) == 8);
        CHECK(s.total(Compartment::I) == 2);
        CHECK(events.empty());
    }
    SUBCASE("E=10 and sigma=0.2 over one day moves exactly 2 users") {
        EpidemicState s(mob);
        for (std::uint32_t u = 0; u < 10; ++u) s.set_compartment(u, Compartment::E);
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            EpidemicState copy = s;
            SplitMix64 rng(seed);
            CHECK(contagion_step(copy, 0, 0.0, day, rng, ctx).to_i == 2);
        }
    }
    SUBCASE("S=99, I=1 exposes one user with probability 0.29898") {
        EpidemicState s(mob);
        s.set_compartment(0, Compartment::I);
        int hits = 0;
        constexpr int kTrials = 20000;
        for (int k = 0; k < kTrials; ++k) {
            EpidemicState copy = s;
            SplitMix64 rng(static_cast<std::uint64_t>(k));
            events.clear();
            const auto tr = contagion_step(copy, 0, 0.302, day, rng, ctx);
            CHECK(tr.to_e <= 1);
            hits += static_cast<int>(tr.to_e);
            REQUIRE(events.size() == tr.to_e);
            if (tr.to_e == 1) {
                CHECK(events[0].run == 3);
                CHECK(events[0].cell == cell_n(0));
                CHECK(events[0].t == ts.horizon().start);
                CHECK(copy.compartment(user_of(mob, events[0].uid)) == Compartment::E);
            }
        }
        const double se = std::sqrt(0.29898 * (1 - 0.29898) / kTrials);
        CHECK(std::abs(hits / static_cast<double>(kTrials) - 0.29898) < 4 * se);
    }
    SUBCASE("transitions are capped by the source compartment and use start-of-step sets") {
        EpidemicState s(mob);
        for (std::uint32_t u = 0; u < 100; ++u) s.set_compartment(u, Compartment::I);
        auto fast = day;
        fast.gamma = 50.0;
        SplitMix64 rng(4);
        const auto tr = contagion_step(s, 0, 1.0, fast, rng, ctx);
        CHECK(tr.to_r == 100);
        CHECK(s.total(Compartment::R) == 100);
        s.check_invariants();
    }
}

TEST_CASE("movement and screening hooks") {
    const Horizon h = days_horizon(1);
    // a: infectious-to-be, walks 0 -> 1 at tick 10 -> 2 at tick 20. b stays in 0.
    GridTrajectory a{"a", h.start, h.step, std::vector<CellId>(288, cell_n(0)), false};
    std::fill(a.cells.begin() + 10, a.cells.end(), cell_n(1));
    std::fill(a.cells.begin() + 20, a.cells.end(), cell_n(2));
    GridTrajectory b{"b", h.start, h.step, std::vector<CellId>(288, cell_n(0)), false};
    const TrajectorySet ts(h, 8, {a, b});
    const auto mob = Mobility::compile(ts, LocalClock{});
    const auto c0 = *mob.dense(cell_n(0));
    const auto c1 = *mob.dense(cell_n(1));
    const auto c2 = *mob.dense(cell_n(2));

    EpidemicState s(mob);
    s.set_compartment(0, Compartment::I);
    for (std::int64_t t = 0; t < 9; ++t) movement_step(s, mob, t);
    CHECK(s.cell_of(0) == c0);
    movement_step(s, mob, 9);
    CHECK(s.cell_of(0) == c1);
    CHECK(s.count(c0, Compartment::I) == 0);
    CHECK(s.count(c1, Compartment::I) == 1);
    CHECK(s.count(c0, Compartment::S) == 1);

    SUBCASE("detect_prob 1 catches the infectious user and removes them from the grid") {
        std::vector<Detection> found;
        SplitMix64 rng(1);
        const StepContext ctx{&mob, 10, 0, nullptr};
        CHECK(screening_hook(s, c1, 1.0, rng, ctx, &found) == 1);
        REQUIRE(found.size() == 1);
        CHECK(found[0] == Detection{"a", h.tick_time(10), cell_n(1)});
        CHECK(s.quarantined(0));
        CHECK(s.occupants(c1) == 0);
        CHECK(s.quarantined_count() == 1);
        CHECK(s.on_grid() == 1);
        for (std::int64_t t = 10; t < 30; ++t) movement_step(s, mob, t);
        CHECK(s.quarantined(0));
        CHECK(s.occupants(c2) == 0);
        s.check_invariants();
    }
    SUBCASE("exposed users and probability 0 are never detected") {
        EpidemicState e = s;
        e.set_compartment(0, Compartment::E);
        SplitMix64 rng(1);
        const StepContext ctx{&mob, 10, 0, nullptr};
        CHECK(screening_hook(e, c1, 1.0, rng, ctx, nullptr) == 0);
        for (int k = 0; k < 100; ++k) CHECK(screening_hook(s, c1, 0.0, rng, ctx, nullptr) == 0);
        CHECK_FALSE(s.quarantined(0));
    }
}

TEST_CASE("run_simulation basics") {
    const auto& city = testing::small_city();
    const auto mob = Mobility::compile(city.trajectories, city.clock);
    const auto field = risk::RiskField::uniform(0.302);

    SUBCASE("zero rates produce no events and keep the initial counts") {
        const auto p = params_with(0.0, 0.0, 0.0, 10);
        const auto run = run_simulation(mob, risk::RiskField::uniform(0.0), p, kNoScreening, 5);
        CHECK(run.events.empty());
        REQUIRE(run.daily.size() == 7);
        for (const auto& d : run.daily) {
            CHECK(d.s == 140);
            CHECK(d.i == 10);
            CHECK(d.e + d.r + d.cum_infections == 0);
        }
    }
    SUBCASE("same seed, identical event logs; conservation at every tick") {
        const auto p = params_with(3.0, 0.5, 0.1, 10);
        RunOptions opts;
        std::size_t ticks = 0;
        opts.observer = [&](const EpidemicState& s, std::int64_t) {
            ++ticks;
            std::size_t on_grid = 0;
            for (std::uint32_t c = 0; c < s.cells(); ++c) on_grid += s.occupants(c);
            REQUIRE(on_grid + s.quarantined_count() == s.population());
            REQUIRE(s.total(Compartment::S) + s.total(Compartment::E) + s.total(Compartment::I) +
                        s.total(Compartment::R) ==
                    s.population());
            if (ticks % 97 == 0) s.check_invariants();
        };
        const auto a = run_simulation(mob, field, p, kNoScreening, 11, 0, opts);
        CHECK(ticks == static_cast<std::size_t>(mob.ticks()));
        const auto b = run_simulation(mob, field, p, kNoScreening, 11);
        CHECK(a == b);
        CHECK(a.events.size() == static_cast<std::size_t>(a.total_infections()));
        CHECK(a.events.size() > 0);
        const auto c = run_simulation(mob, field, p, kNoScreening, 12);
        CHECK(c.events != a.events);

        // Monotone flow and at most one exposure per user.
        std::set<std::string> exposed;
        for (const auto& e : a.events) CHECK(exposed.insert(e.uid).second);
        for (std::size_t d = 1; d < a.daily.size(); ++d) {
            CHECK(a.daily[d].cum_infections >= a.daily[d - 1].cum_infections);
            CHECK(a.daily[d].r >= a.daily[d - 1].r);
            CHECK(a.daily[d].i + a.daily[d].r >= a.daily[d - 1].i + a.daily[d - 1].r);
        }
        // Initially infected users never appear as events.
        const auto init = init_state(mob, p, 11);
        for (const auto& e : a.events) CHECK(init.compartment(user_of(mob, e.uid)) == Compartment::S);
        // Events happen where the user is.
        for (const auto& e : a.events) {
            const auto& traj = city.trajectories.at(*city.trajectories.find(e.uid));
            CHECK(traj.cells[static_cast<std::size_t>((e.t - traj.start) / traj.step)] == e.cell);
        }
    }
    SUBCASE("input mismatches") {
        auto p = params_with(0.3, 0.2, 0.1, 10, 600);
        try {
            (void)run_simulation(mob, field, p, kNoScreening, 1);
            FAIL("expected an error");
        } catch (const InvalidInput& e) {
            CHECK(e.field() == "/params/step");
        }
        p.step = 300;
        risk::SlotClock utc;
        utc.clock.utc_offset_s = 0;
        CHECK_THROWS_AS(run_simulation(mob, risk::RiskField::uniform(0.3, utc), p, kNoScreening, 1), InvalidInput);
    }
}

TEST_CASE("fractional mode follows the classical SEIR integrator") {
    const auto mob = Mobility::compile(static_population(1000, 30), LocalClock{});
    const auto p = params_with(0.302, 0.2, 0.1, 10);
    RunOptions opts;
    opts.mode = Mode::fractional;
    const auto run = run_simulation(mob, risk::RiskField::uniform(0.302), p, kNoScreening, 1, 0, opts);
    const auto oracle = testing::seir_euler_daily({990, 0, 10, 0}, 0.302, 0.2, 0.1, 30, 288);
    REQUIRE(run.daily.size() == 30);
    for (std::size_t d = 0; d < 30; ++d) {
        CAPTURE(d);
        CHECK(std::abs(run.daily[d].s - oracle[d + 1].s) < 1e-9);
        CHECK(std::abs(run.daily[d].e - oracle[d + 1].e) < 1e-9);
        CHECK(std::abs(run.daily[d].i - oracle[d + 1].i) < 1e-9);
        CHECK(std::abs(run.daily[d].r - oracle[d + 1].r) < 1e-9);
        CHECK(std::abs(run.daily[d].cum_infections - (990 - oracle[d + 1].s)) < 1e-9);
    }
    CHECK(run.daily.back().r > 100);

    policy::ScreeningPlan plan;
    plan.add(cell_n(0), {mob.horizon().start, mob.horizon().end, 0.5});
    CHECK_THROWS_AS(run_simulation(mob, risk::RiskField::uniform(0.302), p, plan, 1, 0, opts), InvalidInput);
}

TEST_CASE("screening stops a detected user from infecting anyone") {
    // a (infectious) and b share a cell all day; contact is near certain.
    const Horizon h = days_horizon(1);
    const TrajectorySet ts(h, 8,
                           {GridTrajectory{"a", h.start, h.step, std::vector<CellId>(288, cell_n(0)), false},
                            GridTrajectory{"b", h.start, h.step, std::vector<CellId>(288, cell_n(0)), false}});
    const auto mob = Mobility::compile(ts, LocalClock{});
    // One of the two starts infectious; over a free day the other is almost surely exposed.
    const auto p = params_with(10.0, 0.0, 0.0, 1);
    const auto field = risk::RiskField::uniform(10.0);
    policy::ScreeningPlan plan;
    plan.add(cell_n(0), {h.start + 3600, h.end, 1.0});
    int infected_free = 0;
    int infected_screened = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto free = run_simulation(mob, field, p, kNoScreening, seed);
        infected_free += static_cast<int>(free.events.size());
        const auto screened = run_simulation(mob, field, p, plan, seed);
        infected_screened += static_cast<int>(screened.events.size());
        REQUIRE(screened.detections.size() == 1);
        CHECK(screened.detections[0].t == h.start + 3600);
        // Contagion precedes screening within a tick.
        for (const auto& e : screened.events) CHECK(e.t <= screened.detections[0].t);
        CHECK(screened.daily.back().quarantined == 1);
    }
    CHECK(infected_free >= 36);
    CHECK(infected_screened <= 20);
}

TEST_CASE("ensembles") {
    const auto& city = testing::small_city();
    const auto mob = Mobility::compile(city.trajectories, city.clock);
    const auto field = risk::RiskField::uniform(3.0);
    const auto p = params_with(3.0, 0.5, 0.1, 10);

    SUBCASE("m < 2 is rejected") {
        CHECK_THROWS_AS(run_ensemble(mob, field, p, kNoScreening, 1), InvalidInput);
    }
    SUBCASE("two distinct runs are both kept") {
        const auto r = run_ensemble(mob, field, p, kNoScreening, 2);
        CHECK(r.runs[0].total_infections() != r.runs[1].total_infections());
        CHECK(r.kept.size() == 2);
    }
    SUBCASE("identical runs are all kept with a zero-width band") {
        const auto r = run_ensemble(mob, risk::RiskField::uniform(0.0), params_with(0.0, 0.5, 0.1, 10), kNoScreening, 5);
        CHECK(r.kept.size() == 5);
        for (const auto& d : r.days) {
            CHECK(d.lo == d.mean);
            CHECK(d.hi == d.mean);
        }
    }
    SUBCASE("100 runs: filter, bands, determinism across workers") {
        std::size_t reported = 0;
        EnsembleOptions opts;
        opts.workers = 3;
        opts.progress = [&](std::size_t done, std::size_t total) {
            CHECK(total == 100);
            reported = std::max(reported, done);
        };
        const auto r = run_ensemble(mob, field, p, kNoScreening, 100, opts);
        CHECK(reported == 100);
        CHECK(r.runs.size() == 100);
        CHECK(r.kept.size() >= 90);
        CHECK(r.kept.size() <= 100);
        CHECK(r.population == city.trajectories.size());

        std::vector<double> totals;
        for (const auto& run : r.runs) totals.push_back(run.total_infections());
        // Bounds: the sample values just below the 2.5th and just above the 97.5th percentile.
        auto sorted = totals;
        std::sort(sorted.begin(), sorted.end());
        CHECK(r.total_lo == sorted[2]);
        CHECK(r.total_hi == sorted[97]);
        CHECK(r.total_lo <= testing::percentile(totals, 0.025));
        CHECK(r.total_hi >= testing::percentile(totals, 0.975));
        for (std::size_t k = 0; k < r.runs.size(); ++k) {
            const bool inside = totals[k] >= r.total_lo && totals[k] <= r.total_hi;
            CHECK(inside == std::binary_search(r.kept.begin(), r.kept.end(), k));
        }
        // Bands recomputed independently from the kept runs.
        for (std::size_t d = 0; d < r.days.size(); ++d) {
            std::vector<double> cum;
            for (auto k : r.kept) cum.push_back(r.runs[k].daily[d].cum_infections);
            double mean = 0;
            for (double v : cum) mean += v;
            mean /= static_cast<double>(cum.size());
            CHECK(r.days[d].mean == doctest::Approx(mean).epsilon(1e-12));
            CHECK(r.days[d].lo == doctest::Approx(std::min(testing::percentile(cum, 0.025), mean)).epsilon(1e-12));
            CHECK(r.days[d].hi == doctest::Approx(std::max(testing::percentile(cum, 0.975), mean)).epsilon(1e-12));
            CHECK(r.days[d].lo <= r.days[d].mean);
            CHECK(r.days[d].mean <= r.days[d].hi);
            if (d > 0) CHECK(r.days[d].mean >= r.days[d - 1].mean);
        }

        const auto seq = run_ensemble(mob, field, p, kNoScreening, 100);
        CHECK(seq == r);

        SUBCASE("exports and JSON round trip") {
            std::ostringstream events;
            write_events_jsonl(events, r);
            std::size_t lines = 0;
            std::istringstream in(events.str());
            std::string line;
            std::size_t n_events = 0;
            for (const auto& run : r.runs) n_events += run.events.size();
            while (std::getline(in, line)) {
                const auto j = nlohmann::json::parse(line);
                CHECK(j.contains("run"));
                CHECK(j.contains("uid"));
                CHECK(j.contains("t"));
                CHECK(j.contains("cell"));
                ++lines;
            }
            CHECK(lines == n_events);

            std::ostringstream daily;
            write_daily_csv(daily, r);
            const auto csv = daily.str();
            CHECK(csv.rfind("run,day,S,E,I,R,cum_infections\n", 0) == 0);
            CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 100 * 7);

            const nlohmann::json j = r;
            const auto back = nlohmann::json::parse(j.dump()).get<EnsembleResult>();
            CHECK(back == r);
        }
    }
}
