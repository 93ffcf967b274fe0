#include "epimob/error.hpp"
#include "epimob/risk/epidemic_params.hpp"
#include "epimob/risk/risk_field.hpp"
#include "epimob/risk/synthetic_pois.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <sstream>

using namespace epimob;
using namespace epimob::risk;

namespace {

const geo::GridSystem& h3() {
    static auto g = geo::make_h3_grid();
    return *g;
}

const geo::Resolution kRes(8);
const LatLon kP{35.6812, 139.7671};

PoiTable table_of(const std::vector<PoiRecord>& pois, const RiskConfig& cfg = {}) {
    return PoiTable(pois, h3(), kRes, cfg);
}

PoiRecord poi(const char* cat, LatLon p = kP) { return PoiRecord{p, cat, std::nullopt}; }

int at(int h, int m = 0) { return h * 3600 + m * 60; }

} // namespace

TEST_CASE("category names normalize and resolve aliases") {
    CHECK(normalize_category("Forest Park") == "forest_park");
    CHECK(normalize_category("  Entertainment  Place ") == "entertainment_place");
    CHECK(normalize_category("Supermarket & Shopping Mall") == "supermarket_and_shopping_mall");
    const auto reg = CategoryRegistry::builtin();
    CHECK(reg.canonical("Supermarket & Shopping Mall") == std::optional<std::string>("supermarket"));
    CHECK(reg.canonical("Entertainment Place") == std::optional<std::string>("entertainment"));
    CHECK(reg.canonical("Forest Park") == std::optional<std::string>("forest_park"));
    CHECK_FALSE(reg.canonical("spaceport"));

    RiskConfig cfg;
    cfg.risk_values["karaoke"] = 5.0;
    CHECK(cfg.registry().canonical("Karaoke") == std::optional<std::string>("karaoke"));
}

TEST_CASE("POI ingest") {
    const auto reg = CategoryRegistry::builtin();

    SUBCASE("two restaurants at one point") {
        std::istringstream in("lat,lon,category,open,close\n35.6812,139.7671,Restaurant\n35.6812,139.7671,restaurant\n");
        const auto rep = ingest_pois(in, reg);
        REQUIRE(rep.records.size() == 2);
        const auto t = table_of(rep.records);
        CHECK(t.count(h3().cell_of(kP, kRes), "restaurant") == 2);
    }

    SUBCASE("zero-risk categories are still counted") {
        std::istringstream in("35.6812,139.7671,Forest Park\n");
        const auto rep = ingest_pois(in, reg);
        const auto t = table_of(rep.records);
        CHECK(t.count(h3().cell_of(kP, kRes), "forest_park") == 1);
        CHECK(cumulative_risk(t, RiskConfig{}, h3().cell_of(kP, kRes), at(12)) == 0.0);
    }

    SUBCASE("empty input") {
        std::istringstream in("");
        const auto rep = ingest_pois(in, reg);
        CHECK(rep.records.empty());
        CHECK(table_of(rep.records).cells().empty());
    }

    SUBCASE("unknown categories fail or are skipped") {
        const std::string body = "35.6,139.7,restaurant\n35.6,139.7,spaceport\n35.6,139.7,bar,25:00,02:00\n";
        std::istringstream strict(body);
        try {
            (void)ingest_pois(strict, reg);
            FAIL("expected an error");
        } catch (const InvalidInput& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
        std::istringstream lenient(body);
        const auto rep = ingest_pois(lenient, reg, PoiIngestOptions{true});
        CHECK(rep.records.size() == 1);
        CHECK(rep.rows_skipped == 2);
    }

    SUBCASE("explicit opening hours override the default") {
        std::istringstream in("35.6812,139.7671,restaurant,06:00,09:00\n");
        const auto t = table_of(ingest_pois(in, reg).records);
        const CellId c = h3().cell_of(kP, kRes);
        CHECK(cumulative_risk(t, RiskConfig{}, c, at(7)) == 2.0);
        CHECK(cumulative_risk(t, RiskConfig{}, c, at(12)) == 0.0);
    }

    SUBCASE("CSV round trip") {
        std::vector<PoiRecord> pois{poi("restaurant"), PoiRecord{kP, "station", Schedule{{at(5), at(24)}}}};
        std::stringstream buf;
        write_pois_csv(buf, pois);
        const auto back = ingest_pois(buf, reg).records;
        REQUIRE(back.size() == 2);
        CHECK_FALSE(back[0].open_hours);
        CHECK(back[1].open_hours == pois[1].open_hours);
    }
}

TEST_CASE("opening intervals") {
    const DailyInterval night{at(18), at(2)};
    CHECK(night.contains(at(23)));
    CHECK(night.contains(at(1, 59)));
    CHECK_FALSE(night.contains(at(2)));
    CHECK_FALSE(night.contains(at(17, 59)));
    CHECK(DailyInterval{at(10), at(24)}.contains(at(23, 59)));
    CHECK_THROWS_AS(parse_interval("10:00", "10:00"), InvalidInput);
    CHECK_THROWS_AS(parse_interval("24:00", "10:00"), InvalidInput);
    CHECK(default_schedule("entertainment") == Schedule{{at(18), at(2)}});
    CHECK(default_schedule("restaurant") == Schedule{{at(11), at(23)}});
    CHECK(default_schedule("supermarket") == Schedule{{at(10), at(21)}});
    CHECK(default_schedule("station") == Schedule{{at(9), at(18)}});
}

TEST_CASE("cumulative risk") {
    const RiskConfig cfg;
    CHECK(cfg.risk_of("entertainment") == 8.0);
    CHECK(cfg.risk_of("restaurant") == 2.0);
    CHECK(cfg.risk_of("supermarket") == 1.0);
    CHECK(cfg.k == 0.0003);

    const auto t = table_of({poi("entertainment"), poi("entertainment"), poi("restaurant")});
    const CellId c = h3().cell_of(kP, kRes);
    // 20:00 local: both categories open.
    const double r = cumulative_risk(t, cfg, c, at(20));
    CHECK(r == 18.0);
    CHECK(cfg.k * r == doctest::Approx(0.0054).epsilon(1e-12));
    CHECK(cumulative_risk(t, cfg, c, at(4)) == 0.0);
    CHECK(cumulative_risk(t, cfg, h3().cell_of({35.0, 139.0}, kRes), at(20)) == 0.0);

    const auto zero = table_of({poi("station"), poi("forest_park"), poi("office")});
    CHECK(cumulative_risk(zero, cfg, c, at(12)) == 0.0);
}

TEST_CASE("risk is additive over POI lists and monotone in risk values") {
    const auto& city = testing::small_city();
    const auto pois = generate_synthetic_pois(city);
    REQUIRE(pois.size() > 100);
    const std::vector<PoiRecord> a(pois.begin(), pois.begin() + static_cast<std::ptrdiff_t>(pois.size() / 3));
    const std::vector<PoiRecord> b(pois.begin() + static_cast<std::ptrdiff_t>(pois.size() / 3), pois.end());
    const RiskConfig cfg;
    const auto full = table_of(pois);
    const auto ta = table_of(a);
    const auto tb = table_of(b);
    for (const auto& [cell, groups] : full.cells()) {
        for (int h = 0; h < 24; ++h) {
            CHECK(cumulative_risk(full, cfg, cell, at(h)) ==
                  doctest::Approx(cumulative_risk(ta, cfg, cell, at(h)) + cumulative_risk(tb, cfg, cell, at(h))));
        }
    }

    // Raising one risk value never lowers any increment, so for a fixed base
    // no local rate goes down.
    const SlotClock slots{city.clock, 3600};
    RiskConfig higher = cfg;
    higher.risk_values["restaurant"] = 3.5;
    const auto d0 = delta_table(full, cfg, slots);
    const auto d1 = delta_table(full, higher, slots);
    const RiskField f0(slots, 0.302, 0.25, d0);
    const RiskField f1(slots, 0.302, 0.25, d1);
    for (const auto& [cell, row] : d0) {
        for (int s = 0; s < slots.slots_per_week(); ++s) {
            CHECK(f1.delta_at(cell, s) >= f0.delta_at(cell, s));
            CHECK(f1.beta_at_slot(cell, s) >= f0.beta_at_slot(cell, s));
        }
    }
}

TEST_CASE("base rate derivation") {
    const SlotClock slots{};
    const int n = slots.slots_per_week();
    const CellId c1(0x881), c2(0x882);
    OccupancyHistogram w;
    w.slots = n;
    w.weights[c1] = std::vector<double>(static_cast<std::size_t>(n), 0.5 / n);
    w.weights[c2] = std::vector<double>(static_cast<std::size_t>(n), 0.5 / n);
    CHECK(w.total() == doctest::Approx(1.0));

    CHECK(derive_beta_base(0.302, {}, w) == 0.302);

    SlotTable uniform;
    uniform[c1] = std::vector<double>(static_cast<std::size_t>(n), 0.0054);
    uniform[c2] = std::vector<double>(static_cast<std::size_t>(n), 0.0054);
    CHECK(derive_beta_base(0.302, uniform, w) == doctest::Approx(0.2966).epsilon(1e-12));

    SlotTable toy;
    toy[c2] = std::vector<double>(static_cast<std::size_t>(n), 0.01);
    CHECK(derive_beta_base(0.302, toy, w) == doctest::Approx(0.302 - 0.005).epsilon(1e-12));

    const RiskField f(slots, 0.302, derive_beta_base(0.302, toy, w), toy);
    CHECK(f.beta_at(CellId(0x999), 0) == doctest::Approx(0.297));
    CHECK(f.beta_at(c2, 0) == doctest::Approx(0.307));

    const RiskField negative(slots, 0.0, -0.01, {});
    CHECK(negative.clamped());
    CHECK(negative.beta_at(c1, 0) == 0.0);

    SlotTable bad;
    bad[c1] = std::vector<double>(static_cast<std::size_t>(n), -1.0);
    CHECK_THROWS_AS(RiskField(slots, 0.3, 0.3, bad), InvalidInput);
}

TEST_CASE("occupancy-weighted mean of the field reconstructs beta_global") {
    const auto& city = testing::small_city();
    const auto& ts = city.trajectories;
    const PoiTable pois(generate_synthetic_pois(city), h3(), kRes, RiskConfig{});
    const SlotClock slots{city.clock, 3600};
    const auto built = build_risk_field(pois, RiskConfig{}, 0.302, ts, slots);
    REQUIRE(built.warnings.empty());
    REQUIRE_FALSE(built.field.clamped());
    CHECK(built.field.beta_base() < 0.302);

    // Independent path: average beta over every (user, tick) sample.
    long double sum = 0.0L;
    std::size_t n = 0;
    for (const auto& g : ts.trajectories()) {
        for (std::size_t k = 0; k < g.cells.size(); ++k) {
            sum += built.field.beta_at(g.cells[k], ts.horizon().tick_time(static_cast<std::int64_t>(k)));
            ++n;
        }
    }
    CHECK(std::abs(static_cast<double>(sum / n) - 0.302) < 1e-9);

    const auto occ = occupancy_histogram(ts, slots);
    CHECK(occ.total() == doctest::Approx(1.0).epsilon(1e-12));
    const auto uni = uniform_histogram(ts, slots);
    CHECK(uni.total() == doctest::Approx(1.0).epsilon(1e-12));

    RiskConfig flat = RiskConfig{};
    flat.occupancy_weighting = false;
    const auto unweighted = build_risk_field(pois, flat, 0.302, ts, slots);
    CHECK(unweighted.field.beta_base() > built.field.beta_base());

    RiskConfig huge;
    huge.k = 1.0;
    const auto clamped = build_risk_field(pois, huge, 0.302, ts, slots);
    CHECK(clamped.field.clamped());
    CHECK(clamped.warnings.size() == 1);
}

TEST_CASE("risk config JSON") {
    RiskConfig cfg;
    cfg.risk_values["karaoke"] = 6.0;
    cfg.schedules["karaoke"] = {{at(19), at(4)}};
    cfg.occupancy_weighting = false;
    const nlohmann::json j = cfg;
    const auto back = j.get<RiskConfig>();
    CHECK(back.risk_values == cfg.risk_values);
    CHECK(back.schedules == cfg.schedules);
    CHECK_FALSE(back.occupancy_weighting);

    const auto parsed = nlohmann::json::parse(R"({"risk_values":{"Entertainment":8,"Restaurant":2},"k":0.0003})").get<RiskConfig>();
    CHECK(parsed.risk_values.at("entertainment") == 8.0);
    CHECK(parsed.risk_of("supermarket") == 0.0);

    try {
        (void)nlohmann::json::parse(R"({"risk_values":{"bar":-1}})").get<RiskConfig>();
        FAIL("expected an error");
    } catch (const InvalidInput& e) {
        CHECK(e.field() == "/risk_values/bar");
    }
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"k":"big"})").get<RiskConfig>(), InvalidInput);
}

TEST_CASE("epidemic parameters") {
    const EpidemicParams p;
    CHECK(p.beta_global == 0.302);
    CHECK(p.sigma == 0.2);
    CHECK(p.gamma == 0.1);
    CHECK(p.step == 300);
    CHECK(p.step_days() == doctest::Approx(300.0 / 86400.0));
    const nlohmann::json j = p;
    CHECK(j.get<EpidemicParams>() == p);
    try {
        (void)nlohmann::json::parse(R"({"i0":0})").get<EpidemicParams>();
        FAIL("expected an error");
    } catch (const InvalidInput& e) {
        CHECK(e.field() == "/params/i0");
    }
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"sigma":-1})").get<EpidemicParams>(), InvalidInput);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"betaa":1})").get<EpidemicParams>(), InvalidInput);
}
