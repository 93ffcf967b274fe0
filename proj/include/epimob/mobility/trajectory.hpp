#pragma once

#include "epimob/geo/cell_id.hpp"
#include "epimob/time.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epimob::mobility {

using geo::CellId;
using geo::LatLon;

struct RawPoint {
    UtcSeconds t = 0;
    LatLon pos;

    friend bool operator==(const RawPoint&, const RawPoint&) = default;
};

// Timestamps strictly increasing once ingested.
struct RawTrajectory {
    std::string uid;
    std::vector<RawPoint> points;
};

// One cell per tick over the whole horizon.
struct GridTrajectory {
    std::string uid;
    UtcSeconds start = 0;
    int step = 300;
    std::vector<CellId> cells;
    // Set when two consecutive observations were more than the gap limit apart.
    bool long_gap = false;

    friend bool operator==(const GridTrajectory&, const GridTrajectory&) = default;
};

// All members share start, step and length; uids are unique and kept sorted.
class TrajectorySet {
public:
    TrajectorySet() = default;
    // Throws InvalidInput if a member does not match the horizon or a uid repeats.
    TrajectorySet(Horizon horizon, int resolution, std::vector<GridTrajectory> trajectories);

    const Horizon& horizon() const { return horizon_; }
    int resolution() const { return resolution_; }
    std::size_t size() const { return trajectories_.size(); }
    bool empty() const { return trajectories_.empty(); }
    std::int64_t ticks() const { return horizon_.ticks(); }

    const std::vector<GridTrajectory>& trajectories() const { return trajectories_; }
    const GridTrajectory& at(std::size_t i) const { return trajectories_.at(i); }
    std::optional<std::size_t> find(std::string_view uid) const;

    // Content hash over horizon, resolution and every (uid, cells) pair.
    const std::string& dataset_id() const { return dataset_id_; }

    // Moves the member list out, e.g. to derive a restricted copy.
    std::vector<GridTrajectory> release() && { return std::move(trajectories_); }

private:
    Horizon horizon_;
    int resolution_ = 8;
    std::vector<GridTrajectory> trajectories_;
    std::string dataset_id_;
};

// Local calendar days overlapping a horizon, as tick ranges.
struct DaySlice {
    std::int64_t local_day = 0;  // days since 1970-01-01, local time
    std::int64_t begin_tick = 0; // inclusive
    std::int64_t end_tick = 0;   // exclusive
    bool full = false;           // covers all ticks of the day

    std::int64_t length() const { return end_tick - begin_tick; }
};

std::vector<DaySlice> day_slices(const Horizon& horizon, const LocalClock& clock);

} // namespace epimob::mobility
