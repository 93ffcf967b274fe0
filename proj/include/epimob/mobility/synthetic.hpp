#pragma once

#include "epimob/geo/grid_system.hpp"
#include "epimob/mobility/trajectory.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace epimob::mobility {

// Parameters of the synthetic city used in place of proprietary GPS data.
// Zone centers left empty are drawn uniformly inside city_radius_km.
struct SyntheticCitySpec {
    int n_users = 2000;
    int n_home_zones = 8;
    int n_work_zones = 4;
    int n_leisure_zones = 3;
    LatLon center{35.6812, 139.7671};
    double city_radius_km = 8.0;
    std::vector<LatLon> home_zones;
    std::vector<LatLon> work_zones;
    std::vector<LatLon> leisure_zones;
    std::vector<double> work_zone_weights; // empty = uniform
    double home_zone_radius_km = 1.2;
    double work_zone_radius_km = 0.5;
    double leisure_zone_radius_km = 0.4;
    double wander_radius_km = 2.0;
    double commute_share = 0.7;
    bool weekend_leisure = true;
    double leisure_prob = 0.5;
    std::uint64_t rng_seed = 1;

    // Horizon and sampling.
    std::string start_date = "2012-07-02";
    int days = 14;
    int step = 300;
    int resolution = 8;
    int utc_offset_hours = 9;

    // Throws InvalidInput (n_users = 0, fractions outside [0, 1], ...).
    void validate() const;
    Horizon horizon() const;
    LocalClock clock() const { return LocalClock{utc_offset_hours * 3600}; }
};

void to_json(nlohmann::json& j, const SyntheticCitySpec& s);
void from_json(const nlohmann::json& j, SyntheticCitySpec& s);

enum class Role { commuter, non_commuter };

// Generator ground truth for one user.
struct UserProfile {
    std::string uid;
    Role role = Role::non_commuter;
    LatLon home;
    LatLon work; // meaningful for commuters
    int home_zone = 0;
    int work_zone = -1;
};

struct SyntheticCity {
    SyntheticCitySpec spec;
    Horizon horizon;
    LocalClock clock;
    std::vector<LatLon> home_zones;
    std::vector<LatLon> work_zones;
    std::vector<LatLon> leisure_zones;
    std::vector<UserProfile> profiles; // sorted by uid
    std::vector<RawTrajectory> raw;    // sorted by uid
    TrajectorySet trajectories;
};

// Deterministic in spec.rng_seed: commuters reach work between 09:00 and 11:00
// and leave between 17:00 and 19:00 local on weekdays; weekends are spent at
// home with optional leisure trips; non-commuters wander near home.
SyntheticCity generate_synthetic_city(const SyntheticCitySpec& spec, const geo::GridSystem& grid,
                                      unsigned workers = 1);

// Offsets `origin` by (north_km, east_km).
LatLon offset_km(const LatLon& origin, double north_km, double east_km);

} // namespace epimob::mobility
