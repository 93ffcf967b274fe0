#pragma once

#include "epimob/geo/cell_set.hpp"
#include "epimob/mobility/trajectory.hpp"

#include <span>
#include <unordered_map>
#include <vector>

namespace epimob::mobility {

struct UserDay {
    std::uint32_t user = 0; // index into the TrajectorySet
    std::uint32_t day = 0;  // index into calendar()

    friend auto operator<=>(const UserDay&, const UserDay&) = default;
};

// Per (user, local day): the sorted set of visited cells, plus an inverted
// cell -> (user, day) index for locating everyone who touches a region.
// Immutable after construction.
class HistoryIndex {
public:
    HistoryIndex() = default;
    HistoryIndex(const TrajectorySet& ts, const LocalClock& clock);

    const std::vector<DaySlice>& calendar() const { return calendar_; }
    std::size_t users() const { return users_; }

    std::span<const CellId> visited(std::uint32_t user, std::uint32_t day) const;

    // Days (calendar indices, ascending) of `user` whose visited set avoids `cells`.
    // Only whole days qualify as replacement sources unless include_partial is set.
    std::vector<std::uint32_t> days_avoiding(std::uint32_t user, const geo::CellSet& cells,
                                             bool include_partial = false) const;

    // All (user, day) pairs that visit at least one of `cells`, sorted.
    std::vector<UserDay> visiting(const geo::CellSet& cells) const;

private:
    std::size_t users_ = 0;
    std::vector<DaySlice> calendar_;
    // offsets_[user * days + day] .. offsets_[... + 1] into cells_
    std::vector<std::size_t> offsets_;
    std::vector<CellId> cells_;
    std::unordered_map<CellId, std::vector<UserDay>> by_cell_;
};

} // namespace epimob::mobility
