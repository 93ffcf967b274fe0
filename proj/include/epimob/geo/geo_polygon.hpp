#pragma once

#include "epimob/geo/cell_id.hpp"

#include <vector>

namespace epimob::geo {

// A simple polygon ring in degrees. The closing vertex may be given or
// omitted; it is dropped on construction.
class GeoPolygon {
public:
    GeoPolygon() = default;
    explicit GeoPolygon(std::vector<LatLon> ring);

    const std::vector<LatLon>& ring() const { return ring_; }

    // Throws InvalidInput for < 3 vertices, out-of-range coordinates or a
    // self-intersecting ring.
    void validate() const;

    // Planar area in squared degrees (lon scaled by cos of mean latitude).
    double planar_area() const;
    bool degenerate() const;

    // Even-odd ray casting in lat/lon space.
    bool contains(const LatLon& p) const;

    LatLon centroid() const;

    struct Bounds {
        double min_lat, max_lat, min_lon, max_lon;
    };
    Bounds bounds() const;

    friend bool operator==(const GeoPolygon&, const GeoPolygon&) = default;

private:
    std::vector<LatLon> ring_;
};

} // namespace epimob::geo
