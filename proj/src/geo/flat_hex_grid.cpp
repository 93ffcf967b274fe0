#include "epimob/geo/grid_system.hpp"

#include "epimob/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace epimob::geo {

namespace {

// Layout: bit 63 tag (never set by H3), bits 59-62 resolution,
// bits 29-57 q + 2^28, bits 0-28 r + 2^28.
constexpr std::uint64_t kFlatTag = 1ULL << 63;
constexpr int kAxisBits = 29;
constexpr std::int64_t kAxisOffset = 1LL << 28;
constexpr std::uint64_t kAxisMask = (1ULL << kAxisBits) - 1;

constexpr double kLevel8AreaKm2 = 0.737;
constexpr double kKmPerDegLat = 110.574;
constexpr double kKmPerDegLonEquator = 111.320;

struct Axial {
    std::int64_t q;
    std::int64_t r;
};

class FlatHexGrid final : public GridSystem {
public:
    explicit FlatHexGrid(LatLon origin)
        : origin_(origin), km_per_deg_lon_(kKmPerDegLonEquator * std::cos(origin.lat * std::numbers::pi / 180.0)) {
        for (int res = 0; res <= Resolution::kMax; ++res) {
            const double area = kLevel8AreaKm2 * std::pow(7.0, 8 - res);
            // Pointy-top hexagon: area = (3 sqrt3 / 2) a^2.
            size_km_[static_cast<std::size_t>(res)] = std::sqrt(2.0 * area / (3.0 * std::sqrt(3.0)));
        }
    }

    std::string_view name() const override { return "flat"; }

    CellId cell_of(const LatLon& p, Resolution res) const override {
        validate_coordinate(p);
        const double a = size_km_[static_cast<std::size_t>(res.level())];
        const auto [x, y] = project(p);
        const double qf = (std::sqrt(3.0) / 3.0 * x - y / 3.0) / a;
        const double rf = (2.0 / 3.0 * y) / a;
        return encode(res.level(), cube_round(qf, rf));
    }

    Resolution resolution_of(CellId c) const override {
        return Resolution{static_cast<int>((c.raw() >> 59) & 0xf)};
    }

    bool is_valid(CellId c) const override { return (c.raw() & kFlatTag) != 0 && ((c.raw() >> 58) & 1) == 0; }

    LatLon cell_center(CellId c) const override {
        const int res = resolution_of(c).level();
        const Axial ax = decode(c);
        const double a = size_km_[static_cast<std::size_t>(res)];
        const double x = a * std::sqrt(3.0) * (static_cast<double>(ax.q) + static_cast<double>(ax.r) / 2.0);
        const double y = a * 1.5 * static_cast<double>(ax.r);
        return unproject(x, y);
    }

    std::vector<LatLon> cell_boundary(CellId c) const override {
        const int res = resolution_of(c).level();
        const double a = size_km_[static_cast<std::size_t>(res)];
        const auto [cx, cy] = project(cell_center(c));
        std::vector<LatLon> out;
        out.reserve(6);
        for (int i = 0; i < 6; ++i) {
            const double angle = (60.0 * i - 30.0) * std::numbers::pi / 180.0;
            out.push_back(unproject(cx + a * std::cos(angle), cy + a * std::sin(angle)));
        }
        return out;
    }

    std::vector<CellId> disk(CellId c, int k) const override {
        const int res = resolution_of(c).level();
        const Axial o = decode(c);
        std::vector<CellId> out;
        for (int dq = -k; dq <= k; ++dq) {
            for (int dr = std::max(-k, -dq - k); dr <= std::min(k, -dq + k); ++dr) {
                out.push_back(encode(res, Axial{o.q + dq, o.r + dr}));
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    double cell_area_km2(Resolution res) const override { return kLevel8AreaKm2 * std::pow(7.0, 8 - res.level()); }

    bool is_hierarchical() const override { return false; }

protected:
    std::vector<CellId> centers_inside(const GeoPolygon& poly, Resolution res) const override {
        const auto b = poly.bounds();
        const double a = size_km_[static_cast<std::size_t>(res.level())];
        double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
        for (const auto& corner : {LatLon{b.min_lat, b.min_lon}, LatLon{b.min_lat, b.max_lon},
                                   LatLon{b.max_lat, b.min_lon}, LatLon{b.max_lat, b.max_lon}}) {
            const auto [x, y] = project(corner);
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
            min_y = std::min(min_y, y);
            max_y = std::max(max_y, y);
        }
        const auto r_lo = static_cast<std::int64_t>(std::floor(2.0 / 3.0 * min_y / a)) - 1;
        const auto r_hi = static_cast<std::int64_t>(std::ceil(2.0 / 3.0 * max_y / a)) + 1;
        std::vector<CellId> out;
        for (std::int64_t r = r_lo; r <= r_hi; ++r) {
            const double shift = static_cast<double>(r) / 2.0;
            const auto q_lo = static_cast<std::int64_t>(std::floor(min_x / (a * std::sqrt(3.0)) - shift)) - 1;
            const auto q_hi = static_cast<std::int64_t>(std::ceil(max_x / (a * std::sqrt(3.0)) - shift)) + 1;
            for (std::int64_t q = q_lo; q <= q_hi; ++q) {
                const CellId c = encode(res.level(), Axial{q, r});
                if (poly.contains(cell_center(c))) out.push_back(c);
            }
        }
        return out;
    }

    // Center-based: the coarser cell containing the child's center. Not
    // hierarchical across multiple hops.
    CellId parent_unchecked(CellId c, Resolution coarser) const override { return cell_of(cell_center(c), coarser); }

private:
    std::pair<double, double> project(const LatLon& p) const {
        return {(p.lon - origin_.lon) * km_per_deg_lon_, (p.lat - origin_.lat) * kKmPerDegLat};
    }

    LatLon unproject(double x, double y) const {
        return LatLon{origin_.lat + y / kKmPerDegLat, origin_.lon + x / km_per_deg_lon_};
    }

    static Axial cube_round(double qf, double rf) {
        const double sf = -qf - rf;
        double q = std::round(qf), r = std::round(rf), s = std::round(sf);
        const double dq = std::abs(q - qf), dr = std::abs(r - rf), ds = std::abs(s - sf);
        if (dq > dr && dq > ds) {
            q = -r - s;
        } else if (dr > ds) {
            r = -q - s;
        }
        return Axial{static_cast<std::int64_t>(q), static_cast<std::int64_t>(r)};
    }

    static CellId encode(int res, Axial ax) {
        const auto q = static_cast<std::uint64_t>(ax.q + kAxisOffset) & kAxisMask;
        const auto r = static_cast<std::uint64_t>(ax.r + kAxisOffset) & kAxisMask;
        return CellId{kFlatTag | (static_cast<std::uint64_t>(res) << 59) | (q << kAxisBits) | r};
    }

    static Axial decode(CellId c) {
        const auto q = static_cast<std::int64_t>((c.raw() >> kAxisBits) & kAxisMask) - kAxisOffset;
        const auto r = static_cast<std::int64_t>(c.raw() & kAxisMask) - kAxisOffset;
        return Axial{q, r};
    }

    LatLon origin_;
    double km_per_deg_lon_;
    std::array<double, Resolution::kMax + 1> size_km_{};
};

} // namespace

std::shared_ptr<const GridSystem> make_flat_grid(LatLon origin) {
    validate_coordinate(origin);
    return std::make_shared<const FlatHexGrid>(origin);
}

} // namespace epimob::geo
