#pragma once

#include "epimob/geo/grid_system.hpp"
#include "epimob/mobility/synthetic.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace epimob::testing {

// Small synthetic city on the H3 grid, cached per argument tuple.
const mobility::SyntheticCity& small_city(int n_users = 150, int days = 7, double commute_share = 0.7,
                                          std::uint64_t seed = 7);

// Raw points every `every` seconds over [from, to] at a fixed position.
void stay_at(mobility::RawTrajectory& raw, UtcSeconds from, UtcSeconds to, const geo::LatLon& p,
             UtcSeconds every = 600);

// A user who never stays: a new point 1 km further every `every` seconds.
void keep_moving(mobility::RawTrajectory& raw, UtcSeconds from, UtcSeconds to, const geo::LatLon& origin,
                 UtcSeconds every = 600);

// The 2012-07-02 (Monday) local midnight for the default UTC+9 clock.
UtcSeconds monday_midnight();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace epimob::testing
