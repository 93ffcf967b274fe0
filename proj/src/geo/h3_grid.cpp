#include "epimob/geo/grid_system.hpp"

#include "epimob/error.hpp"

#include <h3api.h>

#include <algorithm>

namespace epimob::geo {

namespace {

GeoCoord to_h3(const LatLon& p) { return GeoCoord{degsToRads(p.lat), degsToRads(p.lon)}; }
LatLon from_h3(const GeoCoord& g) { return LatLon{radsToDegs(g.lat), radsToDegs(g.lon)}; }

class H3Grid final : public GridSystem {
public:
    std::string_view name() const override { return "h3"; }

    CellId cell_of(const LatLon& p, Resolution res) const override {
        validate_coordinate(p);
        const GeoCoord g = to_h3(p);
        const H3Index h = geoToH3(&g, res.level());
        if (h == 0) throw InvalidInput("h3 could not index coordinate");
        return CellId{h};
    }

    Resolution resolution_of(CellId c) const override { return Resolution{h3GetResolution(c.raw())}; }

    bool is_valid(CellId c) const override { return c.valid() && h3IsValid(c.raw()) != 0; }

    LatLon cell_center(CellId c) const override {
        GeoCoord g{};
        h3ToGeo(c.raw(), &g);
        return from_h3(g);
    }

    std::vector<LatLon> cell_boundary(CellId c) const override {
        GeoBoundary b{};
        h3ToGeoBoundary(c.raw(), &b);
        std::vector<LatLon> out;
        out.reserve(static_cast<std::size_t>(b.numVerts));
        for (int i = 0; i < b.numVerts; ++i) out.push_back(from_h3(b.verts[i]));
        return out;
    }

    std::vector<CellId> disk(CellId c, int k) const override {
        std::vector<H3Index> buf(static_cast<std::size_t>(maxKringSize(k)), 0);
        kRing(c.raw(), k, buf.data());
        std::vector<CellId> out;
        for (H3Index h : buf)
            if (h != 0) out.emplace_back(h);
        std::sort(out.begin(), out.end());
        return out;
    }

    double cell_area_km2(Resolution res) const override { return hexAreaKm2(res.level()); }

    bool is_hierarchical() const override { return true; }

protected:
    std::vector<CellId> centers_inside(const GeoPolygon& poly, Resolution res) const override {
        std::vector<GeoCoord> verts;
        verts.reserve(poly.ring().size());
        for (const auto& p : poly.ring()) verts.push_back(to_h3(p));
        ::GeoPolygon h3poly{};
        h3poly.geofence.numVerts = static_cast<int>(verts.size());
        h3poly.geofence.verts = verts.data();
        h3poly.numHoles = 0;
        h3poly.holes = nullptr;
        const int cap = maxPolyfillSize(&h3poly, res.level());
        std::vector<H3Index> buf(static_cast<std::size_t>(std::max(cap, 0)), 0);
        polyfill(&h3poly, res.level(), buf.data());
        std::vector<CellId> out;
        for (H3Index h : buf)
            if (h != 0) out.emplace_back(h);
        return out;
    }

    CellId parent_unchecked(CellId c, Resolution coarser) const override {
        return CellId{h3ToParent(c.raw(), coarser.level())};
    }
};

} // namespace

std::shared_ptr<const GridSystem> make_h3_grid() {
    static const auto instance = std::make_shared<const H3Grid>();
    return instance;
}

} // namespace epimob::geo
