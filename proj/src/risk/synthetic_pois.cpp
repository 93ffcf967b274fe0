#include "epimob/risk/synthetic_pois.hpp"

#include "epimob/rng.hpp"

#include <cmath>
#include <numbers>

namespace epimob::risk {

std::vector<PoiRecord> generate_synthetic_pois(const mobility::SyntheticCity& city, const SyntheticPoiSpec& spec) {
    SplitMix64 rng(derive_seed(spec.rng_seed, {city.spec.rng_seed}));
    std::vector<PoiRecord> out;
    auto scatter = [&](const LatLon& center, double radius_km, int n, const char* category) {
        for (int i = 0; i < n; ++i) {
            const double r = radius_km * std::sqrt(rng.uniform01());
            const double th = 2.0 * std::numbers::pi * rng.uniform01();
            out.push_back(PoiRecord{mobility::offset_km(center, r * std::cos(th), r * std::sin(th)), category, std::nullopt});
        }
    };
    const auto& s = city.spec;
    for (const auto& z : city.work_zones) {
        scatter(z, s.work_zone_radius_km, spec.restaurants_per_work_zone, "restaurant");
        scatter(z, s.work_zone_radius_km, spec.entertainment_per_work_zone, "entertainment");
        scatter(z, s.work_zone_radius_km, spec.stations_per_zone, "station");
    }
    for (const auto& z : city.leisure_zones) {
        scatter(z, s.leisure_zone_radius_km, spec.entertainment_per_leisure_zone, "entertainment");
        scatter(z, s.leisure_zone_radius_km, spec.restaurants_per_leisure_zone, "restaurant");
        scatter(z, s.leisure_zone_radius_km, spec.public_spaces_per_leisure_zone, "public_space");
        scatter(z, s.leisure_zone_radius_km, spec.stations_per_zone, "station");
    }
    for (const auto& z : city.home_zones) {
        scatter(z, s.home_zone_radius_km, spec.supermarkets_per_home_zone, "supermarket");
        scatter(z, s.home_zone_radius_km, spec.restaurants_per_home_zone, "restaurant");
        scatter(z, s.home_zone_radius_km, spec.stations_per_zone, "station");
    }
    scatter(s.center, s.city_radius_km, spec.forest_parks, "forest_park");
    return out;
}

} // namespace epimob::risk
