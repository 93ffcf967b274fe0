#include "epimob/mobility/trajectory.hpp"

#include "epimob/error.hpp"
#include "epimob/hash.hpp"

#include <algorithm>

namespace epimob::mobility {

TrajectorySet::TrajectorySet(Horizon horizon, int resolution, std::vector<GridTrajectory> trajectories)
    : horizon_(horizon), resolution_(resolution), trajectories_(std::move(trajectories)) {
    horizon_.validate();
    const auto ticks = static_cast<std::size_t>(horizon_.ticks());
    std::sort(trajectories_.begin(), trajectories_.end(),
              [](const GridTrajectory& a, const GridTrajectory& b) { return a.uid < b.uid; });
    for (std::size_t i = 0; i < trajectories_.size(); ++i) {
        const auto& tr = trajectories_[i];
        if (i > 0 && trajectories_[i - 1].uid == tr.uid) throw InvalidInput("duplicate uid '" + tr.uid + "'");
        if (tr.start != horizon_.start || tr.step != horizon_.step || tr.cells.size() != ticks) {
            throw InvalidInput("trajectory '" + tr.uid + "' does not match the set horizon");
        }
    }
    ContentHasher h;
    h.update_u64(static_cast<std::uint64_t>(horizon_.start));
    h.update_u64(static_cast<std::uint64_t>(horizon_.end));
    h.update_u64(static_cast<std::uint64_t>(horizon_.step));
    h.update_u64(static_cast<std::uint64_t>(resolution_));
    std::string buf;
    for (const auto& tr : trajectories_) {
        h.update_u64(tr.uid.size());
        h.update(tr.uid);
        buf.resize(tr.cells.size() * 8);
        for (std::size_t k = 0; k < tr.cells.size(); ++k) {
            const std::uint64_t v = tr.cells[k].raw();
            for (int b = 0; b < 8; ++b) buf[k * 8 + b] = static_cast<char>(v >> (8 * b));
        }
        h.update(buf);
    }
    dataset_id_ = "ds-" + h.hex_digest().substr(0, 20);
}

std::optional<std::size_t> TrajectorySet::find(std::string_view uid) const {
    auto it = std::lower_bound(trajectories_.begin(), trajectories_.end(), uid,
                               [](const GridTrajectory& a, std::string_view u) { return a.uid < u; });
    if (it == trajectories_.end() || it->uid != uid) return std::nullopt;
    return static_cast<std::size_t>(it - trajectories_.begin());
}

std::vector<DaySlice> day_slices(const Horizon& horizon, const LocalClock& clock) {
    std::vector<DaySlice> out;
    const auto ticks = horizon.ticks();
    const auto per_day = kSecondsPerDay / horizon.step;
    std::int64_t tick = 0;
    while (tick < ticks) {
        const auto day = clock.local_day(horizon.tick_time(tick));
        const UtcSeconds next_midnight = clock.midnight_utc(day + 1);
        // First tick at or after the next local midnight.
        std::int64_t end = (next_midnight - horizon.start + horizon.step - 1) / horizon.step;
        end = std::min(end, ticks);
        out.push_back(DaySlice{day, tick, end, end - tick == per_day});
        tick = end;
    }
    return out;
}

} // namespace epimob::mobility
