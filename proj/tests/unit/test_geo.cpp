#include "epimob/error.hpp"
#include "epimob/geo/grid_system.hpp"
#include "epimob/mobility/synthetic.hpp"
#include "epimob/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace epimob;
using namespace epimob::geo;
using mobility::offset_km;

namespace {

const LatLon kTokyo{35.6812, 139.7671};

std::vector<std::shared_ptr<const GridSystem>> backends() { return {make_h3_grid(), make_flat_grid()}; }

// Inradius of a regular hexagon with the backend's mean area.
double inradius_m(const GridSystem& g, Resolution r) {
    const double edge_km = std::sqrt(2.0 * g.cell_area_km2(r) / (3.0 * std::sqrt(3.0)));
    return edge_km * 1000.0 * std::sqrt(3.0) / 2.0;
}

std::vector<LatLon> sample_points(std::size_t n, std::uint64_t seed, double radius_km = 6.0) {
    SplitMix64 rng(seed);
    std::vector<LatLon> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(offset_km(kTokyo, (2 * rng.uniform01() - 1) * radius_km, (2 * rng.uniform01() - 1) * radius_km));
    }
    return out;
}

} // namespace

TEST_CASE("cell_of is deterministic and rejects out-of-range coordinates") {
    for (const auto& g : backends()) {
        CAPTURE(g->name());
        const CellId c = g->cell_of(kTokyo, Resolution(8));
        CHECK(c.valid());
        for (int i = 0; i < 100; ++i) CHECK(g->cell_of(kTokyo, Resolution(8)) == c);
        CHECK(g->resolution_of(c).level() == 8);
        CHECK(g->is_valid(c));
        CHECK_THROWS_AS(g->cell_of({91.0, 0.0}, Resolution(8)), InvalidInput);
        CHECK_THROWS_AS(g->cell_of({0.0, -180.5}, Resolution(8)), InvalidInput);
        CHECK(CellId::from_hex(c.to_hex()) == c);
        CHECK(c.to_hex() == [&] {
            auto s = c.to_hex();
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
            return s;
        }());
    }
    CHECK_THROWS_AS(Resolution(16), InvalidInput);
    CHECK_THROWS_AS(Resolution(-1), InvalidInput);
    CHECK(Resolution().level() == 8);
}

TEST_CASE("points 10 m apart share a cell when away from the boundary") {
    for (const auto& g : backends()) {
        CAPTURE(g->name());
        const Resolution r(8);
        for (const auto& p : sample_points(200, 11)) {
            const CellId c = g->cell_of(p, r);
            const LatLon center = g->cell_center(c);
            CHECK(g->cell_of(center, r) == c);
            // Any point within inradius - 10 m of the center keeps its 10 m neighbor in the same cell.
            const LatLon q = offset_km(center, 0.2 * inradius_m(*g, r) / 1000.0, 0.0);
            const LatLon q10 = offset_km(q, 0.0, 0.010);
            CHECK(g->cell_of(q, r) == g->cell_of(q10, r));
        }
    }
}

TEST_CASE("level-8 cell area is about 0.737 km2") {
    for (const auto& g : backends()) {
        CAPTURE(g->name());
        CHECK(g->cell_area_km2(Resolution(8)) == doctest::Approx(0.737).epsilon(0.10));
    }
    // The flat tessellation is exact by construction; check a real cell's polygon too.
    const auto flat = make_flat_grid();
    const CellId c = flat->cell_of(kTokyo, Resolution(8));
    const auto ring = flat->cell_boundary(c);
    REQUIRE(ring.size() == 6);
    double area = 0.0;
    const double coslat = std::cos(kTokyo.lat * M_PI / 180.0);
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % ring.size()];
        area += (a.lon * 111.320 * coslat) * (b.lat * 110.574) - (b.lon * 111.320 * coslat) * (a.lat * 110.574);
    }
    CHECK(std::abs(area) / 2.0 == doctest::Approx(0.737).epsilon(0.10));
}

TEST_CASE("cells_covering") {
    for (const auto& g : backends()) {
        CAPTURE(g->name());
        const Resolution r(8);
        const CellId c = g->cell_of(kTokyo, r);
        const LatLon center = g->cell_center(c);

        SUBCASE("polygon smaller than a cell returns that cell") {
            GeoPolygon tiny({offset_km(center, 0.05, 0.0), offset_km(center, -0.03, 0.04), offset_km(center, -0.03, -0.04)});
            CHECK(g->cells_covering(tiny, r) == std::vector<CellId>{c});
        }

        SUBCASE("hexagon around the 7-cell neighborhood returns 7 cells") {
            std::vector<LatLon> ring;
            std::vector<LatLon> centers;
            for (CellId n : g->disk(c, 1))
                if (n != c) centers.push_back(g->cell_center(n));
            REQUIRE(centers.size() == 6);
            std::sort(centers.begin(), centers.end(), [&](const LatLon& a, const LatLon& b) {
                return std::atan2(a.lat - center.lat, a.lon - center.lon) < std::atan2(b.lat - center.lat, b.lon - center.lon);
            });
            for (const auto& p : centers) {
                ring.push_back({center.lat + 1.5 * (p.lat - center.lat), center.lon + 1.5 * (p.lon - center.lon)});
            }
            const GeoPolygon poly(ring);
            const auto got = g->cells_covering(poly, r);
            CHECK(got.size() == 7);

            // Brute force: every nearby cell whose center is inside.
            std::vector<CellId> expected;
            for (CellId n : g->disk(c, 4))
                if (poly.contains(g->cell_center(n))) expected.push_back(n);
            std::sort(expected.begin(), expected.end());
            CHECK(got == expected);
        }

        SUBCASE("invalid and degenerate rings") {
            GeoPolygon bowtie({{35.0, 139.0}, {35.1, 139.1}, {35.0, 139.1}, {35.1, 139.0}});
            CHECK_THROWS_AS(g->cells_covering(bowtie, r), InvalidInput);
            GeoPolygon two({{35.0, 139.0}, {35.1, 139.1}});
            CHECK_THROWS_AS(g->cells_covering(two, r), InvalidInput);
            GeoPolygon flat_line({{35.0, 139.0}, {35.05, 139.05}, {35.1, 139.1}});
            CHECK(g->cells_covering(flat_line, r).empty());
        }

        SUBCASE("points inside a polygon land in covering cells or their neighbors") {
            GeoPolygon poly({offset_km(kTokyo, -2, -2), offset_km(kTokyo, -2.5, 1.5), offset_km(kTokyo, 1, 3),
                             offset_km(kTokyo, 2.5, 0), offset_km(kTokyo, 0.5, -2.5)});
            const auto cover = g->cells_covering(poly, r);
            std::set<CellId> near(cover.begin(), cover.end());
            for (CellId cc : cover)
                for (CellId n : g->disk(cc, 1)) near.insert(n);
            const auto b = poly.bounds();
            SplitMix64 rng(5);
            int inside = 0;
            for (int i = 0; i < 3000; ++i) {
                const LatLon p{b.min_lat + rng.uniform01() * (b.max_lat - b.min_lat),
                               b.min_lon + rng.uniform01() * (b.max_lon - b.min_lon)};
                if (!poly.contains(p)) continue;
                ++inside;
                CHECK(near.count(g->cell_of(p, r)) == 1);
            }
            CHECK(inside > 1000);
        }
    }
}

TEST_CASE("parent_cell") {
    for (const auto& g : backends()) {
        CAPTURE(g->name());
        const CellId c = g->cell_of(kTokyo, Resolution(8));
        CHECK_THROWS_AS(g->parent_cell(c, Resolution(8)), InvalidInput);
        CHECK_THROWS_AS(g->parent_cell(c, Resolution(9)), InvalidInput);
        CHECK(g->resolution_of(g->parent_cell(c, Resolution(5))).level() == 5);

        // The parent's polygon contains the child's center. H3 descendants
        // spill over their ancestor's outline after several levels, so only
        // the immediate parent is checked there.
        const std::vector<int> levels = g->is_hierarchical() ? std::vector<int>{7} : std::vector<int>{7, 6, 5};
        for (const auto& p : sample_points(300, 3)) {
            const CellId child = g->cell_of(p, Resolution(8));
            for (int level : levels) {
                const CellId parent = g->parent_cell(child, Resolution(level));
                // Child centers can sit exactly on a coarse edge; nudge 0.5 m toward the parent's center.
                const LatLon cc = g->cell_center(child);
                const LatLon pc = g->cell_center(parent);
                const double d = haversine_m(cc, pc);
                const double f = d > 0 ? 0.5 / d : 0.0;
                const LatLon nudged{cc.lat + f * (pc.lat - cc.lat), cc.lon + f * (pc.lon - cc.lon)};
                CHECK(GeoPolygon(g->cell_boundary(parent)).contains(nudged));
            }
        }

        // Points within 100 m of a res-5 parent's center share that parent.
        const CellId p5 = g->parent_cell(c, Resolution(5));
        const LatLon mid = g->cell_center(p5);
        const CellId a = g->cell_of(mid, Resolution(8));
        for (double dx : {-0.07, 0.0, 0.07}) {
            const CellId b = g->cell_of(offset_km(mid, dx, 0.07), Resolution(8));
            CHECK(g->parent_cell(a, Resolution(5)) == g->parent_cell(b, Resolution(5)));
        }
    }
}

TEST_CASE("h3 parents compose across levels on a 1,000-cell sample") {
    const auto g = make_h3_grid();
    REQUIRE(g->is_hierarchical());
    std::set<CellId> cells;
    for (const auto& p : sample_points(5000, 17, 25.0)) cells.insert(g->cell_of(p, Resolution(8)));
    std::size_t checked = 0;
    for (CellId c : cells) {
        if (checked == 1000) break;
        ++checked;
        const CellId via6 = g->parent_cell(g->parent_cell(c, Resolution(6)), Resolution(5));
        CHECK(via6 == g->parent_cell(c, Resolution(5)));
    }
    CHECK(checked == 1000);
}

TEST_CASE("flat backend is single-hop only") {
    CHECK_FALSE(make_flat_grid()->is_hierarchical());
}

TEST_CASE("geojson ring is closed and lon-first") {
    for (const auto& g : backends()) {
        const CellId c = g->cell_of(kTokyo, Resolution(8));
        const auto ring = geojson_ring(*g, c);
        REQUIRE(ring.size() >= 4);
        CHECK(ring.front() == ring.back());
        CHECK(ring.front().first == doctest::Approx(kTokyo.lon).epsilon(0.001));
        CHECK(ring.front().second == doctest::Approx(kTokyo.lat).epsilon(0.001));
    }
}

TEST_CASE("make_grid selects backends by name") {
    CHECK(make_grid("h3")->name() == "h3");
    CHECK(make_grid("flat")->name() == "flat");
    CHECK_THROWS_AS(make_grid("square"), InvalidInput);
}
