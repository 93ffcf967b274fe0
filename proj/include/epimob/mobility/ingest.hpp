#pragma once

#include "epimob/geo/grid_system.hpp"
#include "epimob/mobility/trajectory.hpp"

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace epimob::mobility {

struct IngestOptions {
    // Lenient mode skips and counts malformed rows; strict mode throws on the first.
    bool lenient = false;
};

struct IngestReport {
    std::vector<RawTrajectory> trajectories; // sorted by uid, points sorted by time
    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;           // malformed (lenient mode)
    std::size_t rows_outside_horizon = 0;
    std::size_t rows_duplicate = 0;         // repeated (uid, timestamp), first kept
    std::vector<std::string> errors;        // "line N: reason", lenient mode
};

// CSV with header `uid,timestamp,lat,lon`; timestamps ISO-8601 UTC.
// Strict mode throws InvalidInput naming the offending line.
IngestReport ingest_trajectories(std::istream& in, const Horizon& horizon, const IngestOptions& options = {});
IngestReport ingest_trajectories(const std::filesystem::path& path, const Horizon& horizon,
                                 const IngestOptions& options = {});

// Sorts points by time and collapses duplicate timestamps keeping the first
// occurrence. Returns the number of removed duplicates.
std::size_t normalize_points(RawTrajectory& raw);

struct InterpolateOptions {
    // Gaps above this are still interpolated but flag the trajectory.
    UtcSeconds long_gap_s = 6 * kSecondsPerHour;
};

// One cell per tick of `horizon`: linear lat/lon interpolation between
// observations, first/last observation held at the ends. Throws InvalidInput
// when no point falls inside the horizon.
GridTrajectory interpolate_and_map(const RawTrajectory& raw, const Horizon& horizon, geo::Resolution res,
                                   const geo::GridSystem& grid, const InterpolateOptions& options = {});

struct BuildOptions {
    InterpolateOptions interpolate;
    bool drop_long_gap_users = false;
    unsigned workers = 1;
};

struct BuildReport {
    TrajectorySet trajectories;
    std::vector<std::pair<std::string, std::string>> rejected; // (uid, reason)
};

BuildReport build_trajectory_set(const std::vector<RawTrajectory>& raws, const Horizon& horizon,
                                 geo::Resolution res, const geo::GridSystem& grid, const BuildOptions& options = {});

} // namespace epimob::mobility
