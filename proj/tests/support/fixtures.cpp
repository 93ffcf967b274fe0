#include "support/fixtures.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <tuple>

namespace epimob::testing {

const mobility::SyntheticCity& small_city(int n_users, int days, double commute_share, std::uint64_t seed) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, double, std::uint64_t>, std::unique_ptr<mobility::SyntheticCity>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{n_users, days, commute_share, seed}];
    if (!slot) {
        mobility::SyntheticCitySpec spec;
        spec.n_users = n_users;
        spec.days = days;
        spec.commute_share = commute_share;
        spec.rng_seed = seed;
        spec.city_radius_km = 4.0;
        slot = std::make_unique<mobility::SyntheticCity>(mobility::generate_synthetic_city(spec, *geo::make_h3_grid()));
    }
    return *slot;
}

void stay_at(mobility::RawTrajectory& raw, UtcSeconds from, UtcSeconds to, const geo::LatLon& p, UtcSeconds every) {
    for (UtcSeconds t = from; t <= to; t += every) raw.points.push_back({t, p});
}

void keep_moving(mobility::RawTrajectory& raw, UtcSeconds from, UtcSeconds to, const geo::LatLon& origin,
                 UtcSeconds every) {
    int k = 0;
    for (UtcSeconds t = from; t <= to; t += every, ++k) {
        raw.points.push_back({t, mobility::offset_km(origin, 0.0, (k % 20) * 1.0 + 1.0)});
    }
}

UtcSeconds monday_midnight() {
    return LocalClock{}.midnight_utc(parse_date("2012-07-02").time_since_epoch().count());
}

TempDir::TempDir() {
    std::random_device rd;
    for (;;) {
        path_ = std::filesystem::temp_directory_path() / ("epimob-test-" + std::to_string(rd()));
        if (std::filesystem::create_directory(path_)) return;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

} // namespace epimob::testing
