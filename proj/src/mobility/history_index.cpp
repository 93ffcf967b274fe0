#include "epimob/mobility/history_index.hpp"

#include <algorithm>

namespace epimob::mobility {

HistoryIndex::HistoryIndex(const TrajectorySet& ts, const LocalClock& clock)
    : users_(ts.size()), calendar_(day_slices(ts.horizon(), clock)) {
    const std::size_t days = calendar_.size();
    offsets_.reserve(users_ * days + 1);
    offsets_.push_back(0);
    std::vector<CellId> scratch;
    for (std::size_t u = 0; u < users_; ++u) {
        const auto& cells = ts.at(u).cells;
        for (std::size_t d = 0; d < days; ++d) {
            const auto& slice = calendar_[d];
            scratch.assign(cells.begin() + slice.begin_tick, cells.begin() + slice.end_tick);
            std::sort(scratch.begin(), scratch.end());
            scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
            for (CellId c : scratch) {
                by_cell_[c].push_back(UserDay{static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(d)});
            }
            cells_.insert(cells_.end(), scratch.begin(), scratch.end());
            offsets_.push_back(cells_.size());
        }
    }
}

std::span<const CellId> HistoryIndex::visited(std::uint32_t user, std::uint32_t day) const {
    const std::size_t slot = static_cast<std::size_t>(user) * calendar_.size() + day;
    return {cells_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
}

std::vector<std::uint32_t> HistoryIndex::days_avoiding(std::uint32_t user, const geo::CellSet& cells,
                                                       bool include_partial) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t d = 0; d < calendar_.size(); ++d) {
        if (!include_partial && !calendar_[d].full) continue;
        if (!cells.intersects(visited(user, d))) out.push_back(d);
    }
    return out;
}

std::vector<UserDay> HistoryIndex::visiting(const geo::CellSet& cells) const {
    std::vector<UserDay> out;
    for (CellId c : cells) {
        auto it = by_cell_.find(c);
        if (it != by_cell_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace epimob::mobility
