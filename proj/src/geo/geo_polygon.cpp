#include "epimob/geo/geo_polygon.hpp"

#include "epimob/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace epimob::geo {

namespace {

double cross(const LatLon& o, const LatLon& a, const LatLon& b) {
    return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

int sign(double v) {
    constexpr double eps = 1e-15;
    return v > eps ? 1 : (v < -eps ? -1 : 0);
}

bool on_segment(const LatLon& p, const LatLon& a, const LatLon& b) {
    return std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) && std::min(a.lat, b.lat) <= p.lat &&
           p.lat <= std::max(a.lat, b.lat);
}

bool segments_intersect(const LatLon& a, const LatLon& b, const LatLon& c, const LatLon& d) {
    const int d1 = sign(cross(c, d, a));
    const int d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c));
    const int d4 = sign(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(a, c, d)) return true;
    if (d2 == 0 && on_segment(b, c, d)) return true;
    if (d3 == 0 && on_segment(c, a, b)) return true;
    if (d4 == 0 && on_segment(d, a, b)) return true;
    return false;
}

} // namespace

GeoPolygon::GeoPolygon(std::vector<LatLon> ring) : ring_(std::move(ring)) {
    if (ring_.size() >= 2 && ring_.front() == ring_.back()) ring_.pop_back();
}

void GeoPolygon::validate() const {
    if (ring_.size() < 3) throw InvalidInput("polygon needs at least 3 vertices");
    for (const auto& p : ring_) validate_coordinate(p);
    const std::size_t n = ring_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = ring_[i];
        const auto& b = ring_[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            // Adjacent edges share a vertex by construction.
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            const auto& c = ring_[j];
            const auto& d = ring_[(j + 1) % n];
            if (segments_intersect(a, b, c, d)) {
                throw InvalidInput("polygon ring is self-intersecting (edges " + std::to_string(i) + " and " +
                                   std::to_string(j) + ")");
            }
        }
    }
}

double GeoPolygon::planar_area() const {
    if (ring_.size() < 3) return 0.0;
    double mean_lat = 0.0;
    for (const auto& p : ring_) mean_lat += p.lat;
    mean_lat /= static_cast<double>(ring_.size());
    const double scale = std::cos(mean_lat * std::numbers::pi / 180.0);
    double twice = 0.0;
    for (std::size_t i = 0; i < ring_.size(); ++i) {
        const auto& a = ring_[i];
        const auto& b = ring_[(i + 1) % ring_.size()];
        twice += a.lon * scale * b.lat - b.lon * scale * a.lat;
    }
    return std::abs(twice) / 2.0;
}

bool GeoPolygon::degenerate() const { return planar_area() < 1e-14; }

bool GeoPolygon::contains(const LatLon& p) const {
    bool inside = false;
    const std::size_t n = ring_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = ring_[i];
        const auto& b = ring_[j];
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if (p.lon < x) inside = !inside;
        }
    }
    return inside;
}

LatLon GeoPolygon::centroid() const {
    // Area-weighted centroid; falls back to the vertex mean for tiny rings.
    double a = 0.0, cx = 0.0, cy = 0.0;
    const std::size_t n = ring_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = ring_[i];
        const auto& q = ring_[(i + 1) % n];
        const double f = p.lon * q.lat - q.lon * p.lat;
        a += f;
        cx += (p.lon + q.lon) * f;
        cy += (p.lat + q.lat) * f;
    }
    if (std::abs(a) < 1e-18) {
        LatLon m{};
        for (const auto& p : ring_) {
            m.lat += p.lat;
            m.lon += p.lon;
        }
        m.lat /= static_cast<double>(n);
        m.lon /= static_cast<double>(n);
        return m;
    }
    return LatLon{cy / (3.0 * a), cx / (3.0 * a)};
}

GeoPolygon::Bounds GeoPolygon::bounds() const {
    Bounds b{90.0, -90.0, 180.0, -180.0};
    for (const auto& p : ring_) {
        b.min_lat = std::min(b.min_lat, p.lat);
        b.max_lat = std::max(b.max_lat, p.lat);
        b.min_lon = std::min(b.min_lon, p.lon);
        b.max_lon = std::max(b.max_lon, p.lon);
    }
    return b;
}

} // namespace epimob::geo
