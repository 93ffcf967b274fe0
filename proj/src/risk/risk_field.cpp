#include "epimob/risk/risk_field.hpp"

#include "epimob/error.hpp"

#include <cmath>
#include <cstdio>

namespace epimob::risk {

void SlotClock::validate() const {
    if (slot_s <= 0 || kSecondsPerDay % slot_s != 0) throw InvalidInput("slot length must divide one day", "slot_s");
}

double OccupancyHistogram::total() const {
    double s = 0.0;
    for (const auto& [c, row] : weights)
        for (double w : row) s += w;
    return s;
}

OccupancyHistogram occupancy_histogram(const mobility::TrajectorySet& ts, const SlotClock& slots) {
    slots.validate();
    OccupancyHistogram h;
    h.slots = slots.slots_per_week();
    if (ts.empty()) return h;
    const auto ticks = ts.ticks();
    std::vector<int> slot_of_tick(static_cast<std::size_t>(ticks));
    for (std::int64_t k = 0; k < ticks; ++k) slot_of_tick[static_cast<std::size_t>(k)] = slots.slot_of(ts.horizon().tick_time(k));

    std::unordered_map<CellId, std::vector<std::uint64_t>> counts;
    for (const auto& g : ts.trajectories()) {
        std::vector<std::uint64_t>* row = nullptr;
        CellId last;
        for (std::size_t k = 0; k < g.cells.size(); ++k) {
            if (!row || g.cells[k] != last) {
                last = g.cells[k];
                auto& r = counts[last];
                if (r.empty()) r.assign(static_cast<std::size_t>(h.slots), 0);
                row = &r;
            }
            ++(*row)[static_cast<std::size_t>(slot_of_tick[k])];
        }
    }
    const double total = static_cast<double>(ts.size()) * static_cast<double>(ticks);
    for (auto& [cell, row] : counts) {
        auto& w = h.weights[cell];
        w.resize(row.size());
        for (std::size_t s = 0; s < row.size(); ++s) w[s] = static_cast<double>(row[s]) / total;
    }
    return h;
}

OccupancyHistogram uniform_histogram(const mobility::TrajectorySet& ts, const SlotClock& slots) {
    slots.validate();
    OccupancyHistogram h;
    h.slots = slots.slots_per_week();
    for (const auto& g : ts.trajectories())
        for (CellId c : g.cells) h.weights.try_emplace(c);
    const double w = 1.0 / (static_cast<double>(h.weights.size()) * h.slots);
    for (auto& [c, row] : h.weights) row.assign(static_cast<std::size_t>(h.slots), w);
    return h;
}

SlotTable delta_table(const PoiTable& pois, const RiskConfig& config, const SlotClock& slots) {
    slots.validate();
    const int n = slots.slots_per_week();
    SlotTable table;
    for (const auto& [cell, groups] : pois.cells()) {
        std::vector<double> row(static_cast<std::size_t>(n), 0.0);
        bool any = false;
        for (int s = 0; s < n; ++s) {
            const double d = config.k * cumulative_risk(pois, config, cell, slots.slot_start_of_day(s));
            row[static_cast<std::size_t>(s)] = d;
            any = any || d != 0.0;
        }
        if (any) table.emplace(cell, std::move(row));
    }
    return table;
}

double derive_beta_base(double beta_global, const SlotTable& delta, const OccupancyHistogram& weights) {
    double mean_delta = 0.0;
    for (const auto& [cell, w] : weights.weights) {
        auto it = delta.find(cell);
        if (it == delta.end()) continue;
        if (it->second.size() != w.size()) throw InvalidInput("slot count mismatch between weights and risk table");
        for (std::size_t s = 0; s < w.size(); ++s) mean_delta += w[s] * it->second[s];
    }
    return beta_global - mean_delta;
}

RiskField::RiskField(SlotClock slots, double beta_global, double beta_base, SlotTable delta)
    : slots_(slots), beta_global_(beta_global), beta_base_(beta_base), delta_(std::move(delta)) {
    slots_.validate();
    for (const auto& [c, row] : delta_) {
        if (row.size() != static_cast<std::size_t>(slots_.slots_per_week()))
            throw InvalidInput("risk table row has the wrong number of slots");
        for (double d : row)
            if (!(d >= 0.0)) throw InvalidInput("negative rate increment");
    }
}

RiskField RiskField::uniform(double beta_global, SlotClock slots) { return RiskField(slots, beta_global, beta_global, {}); }

double RiskField::delta_at(CellId cell, int slot) const {
    auto it = delta_.find(cell);
    return it == delta_.end() ? 0.0 : it->second[static_cast<std::size_t>(slot)];
}

const std::vector<double>* RiskField::delta_row(CellId cell) const {
    auto it = delta_.find(cell);
    return it == delta_.end() ? nullptr : &it->second;
}

RiskFieldBuild build_risk_field(const PoiTable& pois, const RiskConfig& config, double beta_global,
                                const mobility::TrajectorySet& ts, const SlotClock& slots) {
    config.validate();
    if (!(beta_global >= 0.0)) throw InvalidInput("beta_global must be non-negative", "/params/beta_global");
    auto delta = delta_table(pois, config, slots);
    const auto weights = config.occupancy_weighting ? occupancy_histogram(ts, slots) : uniform_histogram(ts, slots);
    const double base = derive_beta_base(beta_global, delta, weights);
    RiskFieldBuild out{RiskField(slots, beta_global, base, std::move(delta)), {}};
    if (base < 0.0) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "base rate %.6g is negative; local rates are clamped at 0 and the mean no longer equals %.6g",
                      base, beta_global);
        out.warnings.emplace_back(buf);
    }
    return out;
}

} // namespace epimob::risk
