#pragma once

#include "epimob/mobility/trajectory.hpp"
#include "epimob/risk/poi.hpp"

#include <algorithm>
#include <unordered_map>

namespace epimob::risk {

// Slot-of-week indexing in local time; slot 0 starts Monday 00:00.
struct SlotClock {
    LocalClock clock;
    int slot_s = 3600;

    void validate() const;
    int slots_per_week() const { return static_cast<int>(7 * kSecondsPerDay / slot_s); }
    int slot_of(UtcSeconds t) const {
        return (clock.weekday(t) * static_cast<int>(kSecondsPerDay) + clock.seconds_of_day(t)) / slot_s;
    }
    // Local seconds of day at which the slot starts.
    int slot_start_of_day(int slot) const { return (slot * slot_s) % static_cast<int>(kSecondsPerDay); }
};

// Sparse (cell, slot) table of doubles.
using SlotTable = std::unordered_map<CellId, std::vector<double>>;

// Weights over (cell, slot) summing to 1.
struct OccupancyHistogram {
    int slots = 0;
    SlotTable weights;

    double total() const;
};

// Fraction of all (user, tick) samples falling into each (cell, slot).
OccupancyHistogram occupancy_histogram(const mobility::TrajectorySet& ts, const SlotClock& slots);
// Equal weight on every slot of every cell visited in the data set.
OccupancyHistogram uniform_histogram(const mobility::TrajectorySet& ts, const SlotClock& slots);

// Delta = k * R per (cell, slot), with open status taken at slot start.
SlotTable delta_table(const PoiTable& pois, const RiskConfig& config, const SlotClock& slots);

// beta_global - sum w * delta.
double derive_beta_base(double beta_global, const SlotTable& delta, const OccupancyHistogram& weights);

class RiskField {
public:
    RiskField() = default;
    RiskField(SlotClock slots, double beta_global, double beta_base, SlotTable delta);
    // Field without POI effects: beta = beta_global everywhere.
    static RiskField uniform(double beta_global, SlotClock slots = {});

    const SlotClock& slots() const { return slots_; }
    double beta_global() const { return beta_global_; }
    double beta_base() const { return beta_base_; }
    bool clamped() const { return beta_base_ < 0.0; }
    const SlotTable& delta() const { return delta_; }

    double delta_at(CellId cell, int slot) const;
    double beta_at_slot(CellId cell, int slot) const { return std::max(0.0, beta_base_ + delta_at(cell, slot)); }
    double beta_at(CellId cell, UtcSeconds t) const { return beta_at_slot(cell, slots_.slot_of(t)); }

    // Row of per-slot deltas for a cell, or nullptr if the cell has none.
    const std::vector<double>* delta_row(CellId cell) const;

private:
    SlotClock slots_;
    double beta_global_ = 0.0;
    double beta_base_ = 0.0;
    SlotTable delta_;
};

struct RiskFieldBuild {
    RiskField field;
    std::vector<std::string> warnings;
};

RiskFieldBuild build_risk_field(const PoiTable& pois, const RiskConfig& config, double beta_global,
                                const mobility::TrajectorySet& ts, const SlotClock& slots);

} // namespace epimob::risk
