#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace epimob::geo {

// Opaque 64-bit cell identifier. The grid backend owns the bit layout; the
// resolution is always recoverable through GridSystem::resolution_of.
class CellId {
public:
    constexpr CellId() = default;
    constexpr explicit CellId(std::uint64_t raw) : raw_(raw) {}

    constexpr std::uint64_t raw() const { return raw_; }
    constexpr bool valid() const { return raw_ != 0; }

    // Lowercase hexadecimal, no prefix (the format used in files and payloads).
    std::string to_hex() const;
    static CellId from_hex(std::string_view text);

    friend constexpr auto operator<=>(CellId, CellId) = default;

private:
    std::uint64_t raw_ = 0;
};

class Resolution {
public:
    static constexpr int kMin = 0;
    static constexpr int kMax = 15;
    static constexpr int kDefault = 8;

    constexpr Resolution() = default;
    // Throws InvalidInput outside [0, 15].
    explicit Resolution(int level);

    constexpr int level() const { return level_; }
    friend constexpr auto operator<=>(Resolution, Resolution) = default;

private:
    int level_ = kDefault;
};

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const LatLon&, const LatLon&) = default;
};

// Throws InvalidInput unless lat in [-90, 90] and lon in [-180, 180].
void validate_coordinate(const LatLon& p);

// Great-circle distance in meters.
double haversine_m(const LatLon& a, const LatLon& b);

} // namespace epimob::geo

template <>
struct std::hash<epimob::geo::CellId> {
    std::size_t operator()(epimob::geo::CellId c) const noexcept {
        std::uint64_t z = c.raw() + 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return static_cast<std::size_t>(z ^ (z >> 31));
    }
};
