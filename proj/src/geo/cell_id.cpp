#include "epimob/geo/cell_id.hpp"

#include "epimob/error.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

namespace epimob::geo {

std::string CellId::to_hex() const {
    char buf[17];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, raw_, 16);
    return std::string(buf, ptr);
}

CellId CellId::from_hex(std::string_view text) {
    if (text.starts_with("0x")) text.remove_prefix(2);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
    if (text.empty() || text.size() > 16 || ec != std::errc{} || ptr != text.data() + text.size() || v == 0) {
        throw InvalidInput("invalid cell id '" + std::string(text) + "'");
    }
    return CellId{v};
}

Resolution::Resolution(int level) : level_(level) {
    if (level < kMin || level > kMax) {
        throw InvalidInput("resolution " + std::to_string(level) + " outside [0, 15]", "res");
    }
}

void validate_coordinate(const LatLon& p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0 || p.lon < -180.0 ||
        p.lon > 180.0) {
        throw InvalidInput("coordinate out of range (" + std::to_string(p.lat) + ", " + std::to_string(p.lon) + ")");
    }
}

double haversine_m(const LatLon& a, const LatLon& b) {
    constexpr double kEarthRadiusM = 6371008.8;
    constexpr double kRad = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * kRad;
    const double dlon = (b.lon - a.lon) * kRad;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

} // namespace epimob::geo
