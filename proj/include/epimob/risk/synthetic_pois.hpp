#pragma once

#include "epimob/mobility/synthetic.hpp"
#include "epimob/risk/poi.hpp"

namespace epimob::risk {

// POIs scattered around the zones of a synthetic city: food and nightlife
// near work and leisure zones, shops near homes, some zero-risk places.
struct SyntheticPoiSpec {
    int restaurants_per_work_zone = 25;
    int entertainment_per_work_zone = 4;
    int entertainment_per_leisure_zone = 15;
    int restaurants_per_leisure_zone = 10;
    int supermarkets_per_home_zone = 4;
    int restaurants_per_home_zone = 6;
    int stations_per_zone = 2;
    int public_spaces_per_leisure_zone = 3;
    int forest_parks = 10;
    std::uint64_t rng_seed = 3;
};

std::vector<PoiRecord> generate_synthetic_pois(const mobility::SyntheticCity& city, const SyntheticPoiSpec& spec = {});

} // namespace epimob::risk
