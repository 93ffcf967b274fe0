#pragma once

#include "epimob/geo/cell_id.hpp"

#include <algorithm>
#include <span>
#include <vector>

namespace epimob::geo {

// Sorted, duplicate-free set of cells with ordered iteration.
class CellSet {
public:
    CellSet() = default;
    explicit CellSet(std::vector<CellId> cells) : cells_(std::move(cells)) {
        std::sort(cells_.begin(), cells_.end());
        cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
    }

    bool contains(CellId c) const { return std::binary_search(cells_.begin(), cells_.end(), c); }
    bool empty() const { return cells_.empty(); }
    std::size_t size() const { return cells_.size(); }
    const std::vector<CellId>& cells() const { return cells_; }
    auto begin() const { return cells_.begin(); }
    auto end() const { return cells_.end(); }

    bool intersects(std::span<const CellId> sorted_other) const {
        auto a = cells_.begin();
        auto b = sorted_other.begin();
        while (a != cells_.end() && b != sorted_other.end()) {
            if (*a < *b) {
                ++a;
            } else if (*b < *a) {
                ++b;
            } else {
                return true;
            }
        }
        return false;
    }

    CellSet merged(const CellSet& other) const {
        std::vector<CellId> all = cells_;
        all.insert(all.end(), other.cells_.begin(), other.cells_.end());
        return CellSet(std::move(all));
    }

    friend bool operator==(const CellSet&, const CellSet&) = default;

private:
    std::vector<CellId> cells_;
};

} // namespace epimob::geo
