#pragma once

#include "epimob/mobility/trajectory.hpp"
#include "epimob/policy/policy.hpp"
#include "epimob/risk/epidemic_params.hpp"
#include "epimob/risk/risk_field.hpp"
#include "epimob/rng.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epimob::engine {

using geo::CellId;

// A user's cell changes between tick t-1 and t.
struct Move {
    std::uint32_t user = 0;
    std::uint32_t to = 0; // dense cell index
};

// Trajectories re-encoded for the engine: dense cell indices, the starting
// cell of every user, and per tick only the users that change cell.
class Mobility {
public:
    Mobility() = default;
    static Mobility compile(const mobility::TrajectorySet& ts, const LocalClock& clock);

    const Horizon& horizon() const { return horizon_; }
    const LocalClock& clock() const { return clock_; }
    int resolution() const { return resolution_; }
    std::int64_t ticks() const { return horizon_.ticks(); }
    const std::vector<mobility::DaySlice>& calendar() const { return calendar_; }

    std::size_t users() const { return uids_.size(); }
    const std::string& uid(std::uint32_t user) const { return uids_[user]; }
    std::size_t cells() const { return cells_.size(); }
    CellId cell(std::uint32_t dense) const { return cells_[dense]; }
    std::optional<std::uint32_t> dense(CellId c) const;

    std::uint32_t initial_cell(std::uint32_t user) const { return initial_[user]; }
    // Moves that take effect when stepping from tick-1 to tick (tick >= 1).
    std::span<const Move> moves_at(std::int64_t tick) const;

private:
    Horizon horizon_;
    LocalClock clock_;
    int resolution_ = 8;
    std::vector<mobility::DaySlice> calendar_;
    std::vector<std::string> uids_;
    std::vector<CellId> cells_; // sorted
    std::vector<std::uint32_t> initial_;
    std::vector<std::size_t> move_offsets_; // ticks + 1 entries
    std::vector<Move> moves_;
};

enum class Compartment : std::uint8_t { S = 0, E = 1, I = 2, R = 3 };
inline constexpr std::size_t kCompartments = 4;

// Per-cell compartment sets plus a global user -> (cell, compartment) map.
// Quarantined users live in an off-grid pseudo cell that is excluded from
// every per-cell query over the grid.
class EpidemicState {
public:
    EpidemicState() = default;
    // Everyone susceptible, placed at their tick-0 cell.
    explicit EpidemicState(const Mobility& mob);

    std::size_t population() const { return comp_.size(); }
    std::size_t cells() const { return n_cells_; }
    std::uint32_t off_grid() const { return static_cast<std::uint32_t>(n_cells_); }

    Compartment compartment(std::uint32_t u) const { return static_cast<Compartment>(comp_[u]); }
    std::uint32_t cell_of(std::uint32_t u) const { return cell_[u]; }
    bool quarantined(std::uint32_t u) const { return cell_[u] == off_grid(); }

    // Cell index may be off_grid().
    const std::vector<std::uint32_t>& members(std::uint32_t cell, Compartment c) const {
        return members_[cell * kCompartments + static_cast<std::size_t>(c)];
    }
    std::size_t count(std::uint32_t cell, Compartment c) const { return members(cell, c).size(); }
    std::size_t occupants(std::uint32_t cell) const;
    // Exposed plus infectious users in the cell: nothing can happen where this is 0.
    std::size_t active(std::uint32_t cell) const {
        return count(cell, Compartment::E) + count(cell, Compartment::I);
    }

    // Totals over every user, quarantined included.
    std::size_t total(Compartment c) const { return totals_[static_cast<std::size_t>(c)]; }
    std::size_t quarantined_count() const { return occupants(off_grid()); }
    // Users counted in some grid cell.
    std::size_t on_grid() const;

    void set_compartment(std::uint32_t u, Compartment c);
    void move(std::uint32_t u, std::uint32_t cell);
    void quarantine(std::uint32_t u) { move(u, off_grid()); }

    // Full structural check; throws std::logic_error describing the first violation.
    void check_invariants() const;

private:
    std::size_t n_cells_ = 0;
    std::vector<std::uint8_t> comp_;
    std::vector<std::uint32_t> cell_;
    std::vector<std::uint32_t> pos_;
    std::vector<std::vector<std::uint32_t>> members_;
    std::array<std::size_t, kCompartments> totals_{};
};

struct InfectionEvent {
    std::string uid;
    UtcSeconds t = 0;
    CellId cell;
    std::size_t run = 0;

    friend bool operator==(const InfectionEvent&, const InfectionEvent&) = default;
};

struct Detection {
    std::string uid;
    UtcSeconds t = 0;
    CellId cell;

    friend bool operator==(const Detection&, const Detection&) = default;
};

// I0 distinct users drawn uniformly with the run seed become infectious.
EpidemicState init_state(const Mobility& mob, const EpidemicParams& params, std::uint64_t run_seed);

// floor(x) + Bernoulli(x - floor(x)).
std::uint64_t sample_discrete_increment(double x, SplitMix64& rng);

// Continuous per-step increments from start-of-step counts; rates are per day.
struct Increments {
    double to_e = 0.0;
    double to_i = 0.0;
    double to_r = 0.0;
};
Increments seir_increments(double s, double e, double i, double n, double beta, const EpidemicParams& params);

struct Transitions {
    std::uint64_t to_e = 0;
    std::uint64_t to_i = 0;
    std::uint64_t to_r = 0;
};

struct StepContext {
    const Mobility* mob = nullptr;
    std::int64_t tick = 0;
    std::size_t run = 0;
    std::vector<InfectionEvent>* events = nullptr; // may be null
};

// One synchronous SEIR step inside a cell (or the off-grid pool). Users to
// move are drawn uniformly without replacement from start-of-step sets.
Transitions contagion_step(EpidemicState& state, std::uint32_t cell, double beta, const EpidemicParams& params,
                           SplitMix64& rng, const StepContext& ctx);

// Each infectious user in the cell is detected with probability p and quarantined.
std::size_t screening_hook(EpidemicState& state, std::uint32_t cell, double detect_prob, SplitMix64& rng,
                           const StepContext& ctx, std::vector<Detection>* detections);

// Moves every on-grid user from their `tick` cell to their `tick + 1` cell;
// quarantined users stay off grid.
void movement_step(EpidemicState& state, const Mobility& mob, std::int64_t tick);

// End-of-day compartment totals (quarantined users included in their compartment).
struct DayCounts {
    std::int64_t local_day = 0;
    double s = 0.0;
    double e = 0.0;
    double i = 0.0;
    double r = 0.0;
    double cum_infections = 0.0;
    double quarantined = 0.0;

    friend bool operator==(const DayCounts&, const DayCounts&) = default;
};

struct SimulationRun {
    std::size_t run_index = 0;
    std::uint64_t rng_seed = 0;
    std::vector<InfectionEvent> events;
    std::vector<DayCounts> daily;
    std::vector<Detection> detections;

    double total_infections() const { return daily.empty() ? 0.0 : daily.back().cum_infections; }

    friend bool operator==(const SimulationRun&, const SimulationRun&) = default;
};

enum class Mode {
    stochastic,
    // Increments kept as real numbers, no sampling; used to check against the ODE.
    fractional,
};

struct RunOptions {
    Mode mode = Mode::stochastic;
    bool record_events = true;
    // Called after every tick's contagion and screening, before movement.
    std::function<void(const EpidemicState&, std::int64_t tick)> observer;
};

// Per (cell, tick) contagion, then screening, then off-grid recovery, then movement.
SimulationRun run_simulation(const Mobility& mob, const risk::RiskField& field, const EpidemicParams& params,
                             const policy::ScreeningPlan& plan, std::uint64_t run_seed, std::size_t run_index = 0,
                             const RunOptions& options = {});

} // namespace epimob::engine
