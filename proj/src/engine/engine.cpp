#include "epimob/engine/engine.hpp"

#include "epimob/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace epimob::engine {

namespace {

constexpr std::uint64_t kContagionStream = 0;
constexpr std::uint64_t kScreeningStream = 1;
constexpr std::uint64_t kOffGridStream = 2;
constexpr std::uint64_t kInitStream = 0x696e6974;

} // namespace

Mobility Mobility::compile(const mobility::TrajectorySet& ts, const LocalClock& clock) {
    Mobility m;
    m.horizon_ = ts.horizon();
    m.clock_ = clock;
    m.resolution_ = ts.resolution();
    m.calendar_ = mobility::day_slices(ts.horizon(), clock);
    const auto ticks = static_cast<std::size_t>(ts.ticks());

    std::vector<CellId> seen;
    for (const auto& t : ts.trajectories()) {
        m.uids_.push_back(t.uid);
        for (std::size_t k = 0; k < t.cells.size(); ++k)
            if (k == 0 || t.cells[k] != t.cells[k - 1]) seen.push_back(t.cells[k]);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    m.cells_ = std::move(seen);
    std::unordered_map<CellId, std::uint32_t> lookup;
    lookup.reserve(m.cells_.size());
    for (std::uint32_t i = 0; i < m.cells_.size(); ++i) lookup.emplace(m.cells_[i], i);

    m.move_offsets_.assign(ticks + 1, 0);
    for (const auto& t : ts.trajectories())
        for (std::size_t k = 1; k < t.cells.size(); ++k)
            if (t.cells[k] != t.cells[k - 1]) ++m.move_offsets_[k + 1];
    std::partial_sum(m.move_offsets_.begin(), m.move_offsets_.end(), m.move_offsets_.begin());
    m.moves_.resize(m.move_offsets_.back());
    auto fill = m.move_offsets_;
    for (std::uint32_t u = 0; u < ts.size(); ++u) {
        const auto& cells = ts.at(u).cells;
        m.initial_.push_back(cells.empty() ? 0 : lookup.at(cells[0]));
        for (std::size_t k = 1; k < cells.size(); ++k)
            if (cells[k] != cells[k - 1]) m.moves_[fill[k]++] = Move{u, lookup.at(cells[k])};
    }
    return m;
}

std::optional<std::uint32_t> Mobility::dense(CellId c) const {
    auto it = std::lower_bound(cells_.begin(), cells_.end(), c);
    if (it == cells_.end() || *it != c) return std::nullopt;
    return static_cast<std::uint32_t>(it - cells_.begin());
}

std::span<const Move> Mobility::moves_at(std::int64_t tick) const {
    if (tick < 1 || tick >= ticks()) return {};
    const auto k = static_cast<std::size_t>(tick);
    return {moves_.data() + move_offsets_[k], moves_.data() + move_offsets_[k + 1]};
}

EpidemicState::EpidemicState(const Mobility& mob)
    : n_cells_(mob.cells()),
      comp_(mob.users(), static_cast<std::uint8_t>(Compartment::S)),
      cell_(mob.users()),
      pos_(mob.users()),
      members_((mob.cells() + 1) * kCompartments) {
    for (std::uint32_t u = 0; u < mob.users(); ++u) {
        const auto c = mob.initial_cell(u);
        auto& list = members_[c * kCompartments];
        cell_[u] = c;
        pos_[u] = static_cast<std::uint32_t>(list.size());
        list.push_back(u);
    }
    totals_[0] = mob.users();
}

std::size_t EpidemicState::occupants(std::uint32_t cell) const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < kCompartments; ++c) n += members_[cell * kCompartments + c].size();
    return n;
}

std::size_t EpidemicState::on_grid() const { return population() - quarantined_count(); }

namespace {

void relocate(std::vector<std::vector<std::uint32_t>>& members, std::vector<std::uint32_t>& pos, std::uint32_t u,
              std::size_t from_list, std::size_t to_list) {
    auto& from = members[from_list];
    const auto at = pos[u];
    const auto last = from.back();
    from[at] = last;
    pos[last] = at;
    from.pop_back();
    auto& to = members[to_list];
    pos[u] = static_cast<std::uint32_t>(to.size());
    to.push_back(u);
}

} // namespace

void EpidemicState::set_compartment(std::uint32_t u, Compartment c) {
    const auto old = comp_[u];
    const auto now = static_cast<std::uint8_t>(c);
    if (old == now) return;
    relocate(members_, pos_, u, cell_[u] * kCompartments + old, cell_[u] * kCompartments + now);
    comp_[u] = now;
    --totals_[old];
    ++totals_[now];
}

void EpidemicState::move(std::uint32_t u, std::uint32_t cell) {
    if (cell_[u] == cell) return;
    relocate(members_, pos_, u, cell_[u] * kCompartments + comp_[u], cell * kCompartments + comp_[u]);
    cell_[u] = cell;
}

void EpidemicState::check_invariants() const {
    std::size_t listed = 0;
    std::array<std::size_t, kCompartments> recount{};
    for (std::uint32_t cell = 0; cell <= n_cells_; ++cell) {
        for (std::size_t c = 0; c < kCompartments; ++c) {
            const auto& list = members_[cell * kCompartments + c];
            for (std::size_t i = 0; i < list.size(); ++i) {
                const auto u = list[i];
                if (cell_[u] != cell || comp_[u] != c || pos_[u] != i)
                    throw std::logic_error("user " + std::to_string(u) + " is listed inconsistently");
            }
            listed += list.size();
            recount[c] += list.size();
        }
    }
    if (listed != population())
        throw std::logic_error("compartment sets hold " + std::to_string(listed) + " users, population is " +
                               std::to_string(population()));
    if (recount != totals_) throw std::logic_error("compartment totals drifted");
}

EpidemicState init_state(const Mobility& mob, const EpidemicParams& params, std::uint64_t run_seed) {
    params.validate();
    if (static_cast<std::size_t>(params.i0) > mob.users())
        throw InvalidInput("i0 = " + std::to_string(params.i0) + " exceeds the population of " +
                               std::to_string(mob.users()),
                           "/params/i0");
    EpidemicState state(mob);
    std::vector<std::uint32_t> order(mob.users());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(derive_seed(run_seed, {kInitStream}));
    for (std::size_t k = 0; k < static_cast<std::size_t>(params.i0); ++k) {
        std::swap(order[k], order[k + rng.below(order.size() - k)]);
        state.set_compartment(order[k], Compartment::I);
    }
    return state;
}

std::uint64_t sample_discrete_increment(double x, SplitMix64& rng) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput("increment must be a finite non-negative number");
    const double whole = std::floor(x);
    const double frac = x - whole;
    auto n = static_cast<std::uint64_t>(whole);
    if (frac > 0.0 && rng.bernoulli(frac)) ++n;
    return n;
}

Increments seir_increments(double s, double e, double i, double n, double beta, const EpidemicParams& params) {
    const double h = params.step_days();
    Increments inc;
    if (n > 0.0) inc.to_e = beta * h * s * i / n;
    inc.to_i = params.sigma * h * e;
    inc.to_r = params.gamma * h * i;
    return inc;
}

Transitions contagion_step(EpidemicState& state, std::uint32_t cell, double beta, const EpidemicParams& params,
                           SplitMix64& rng, const StepContext& ctx) {
    const auto s = state.count(cell, Compartment::S);
    const auto e = state.count(cell, Compartment::E);
    const auto i = state.count(cell, Compartment::I);
    const auto n = state.occupants(cell);
    Transitions tr;
    if (n == 0) return tr;
    const auto inc = seir_increments(static_cast<double>(s), static_cast<double>(e), static_cast<double>(i),
                                     static_cast<double>(n), beta, params);
    if (s > 0 && i > 0) tr.to_e = std::min<std::uint64_t>(s, sample_discrete_increment(inc.to_e, rng));
    if (e > 0) tr.to_i = std::min<std::uint64_t>(e, sample_discrete_increment(inc.to_i, rng));
    if (i > 0) tr.to_r = std::min<std::uint64_t>(i, sample_discrete_increment(inc.to_r, rng));

    // Drain each source set before anything is added to it, so every draw
    // sees exactly the start-of-step members.
    auto draw = [&](Compartment from, Compartment to, std::uint64_t k, bool record) {
        for (std::uint64_t j = 0; j < k; ++j) {
            const auto& list = state.members(cell, from);
            const auto u = list[rng.below(list.size())];
            state.set_compartment(u, to);
            if (record && ctx.events) {
                ctx.events->push_back(InfectionEvent{ctx.mob->uid(u), ctx.mob->horizon().tick_time(ctx.tick),
                                                     ctx.mob->cell(cell), ctx.run});
            }
        }
    };
    draw(Compartment::I, Compartment::R, tr.to_r, false);
    draw(Compartment::E, Compartment::I, tr.to_i, false);
    draw(Compartment::S, Compartment::E, tr.to_e, true);
    return tr;
}

std::size_t screening_hook(EpidemicState& state, std::uint32_t cell, double detect_prob, SplitMix64& rng,
                           const StepContext& ctx, std::vector<Detection>* detections) {
    if (detect_prob <= 0.0 || state.count(cell, Compartment::I) == 0) return 0;
    const std::vector<std::uint32_t> infectious = state.members(cell, Compartment::I);
    std::size_t found = 0;
    for (const auto u : infectious) {
        if (!rng.bernoulli(detect_prob)) continue;
        state.quarantine(u);
        ++found;
        if (detections)
            detections->push_back(
                Detection{ctx.mob->uid(u), ctx.mob->horizon().tick_time(ctx.tick), ctx.mob->cell(cell)});
    }
    return found;
}

void movement_step(EpidemicState& state, const Mobility& mob, std::int64_t tick) {
    for (const auto& m : mob.moves_at(tick + 1))
        if (!state.quarantined(m.user)) state.move(m.user, m.to);
}

namespace {

struct Prepared {
    std::vector<const std::vector<double>*> rows; // per dense cell
    std::vector<std::pair<std::uint32_t, CellId>> screened;
};

Prepared prepare(const Mobility& mob, const risk::RiskField& field, const EpidemicParams& params,
                 const policy::ScreeningPlan& plan) {
    params.validate();
    if (params.step != mob.horizon().step)
        throw InvalidInput("time step " + std::to_string(params.step) + " s differs from the trajectories' " +
                               std::to_string(mob.horizon().step) + " s",
                           "/params/step");
    if (field.slots().clock.utc_offset_s != mob.clock().utc_offset_s)
        throw InvalidInput("risk field and trajectories use different local clocks");
    Prepared p;
    p.rows.resize(mob.cells());
    for (std::uint32_t c = 0; c < mob.cells(); ++c) p.rows[c] = field.delta_row(mob.cell(c));
    for (const auto& [cell, windows] : plan.windows())
        if (auto d = mob.dense(cell)) p.screened.emplace_back(*d, cell);
    return p;
}

double beta_of(const risk::RiskField& field, const Prepared& p, std::uint32_t cell, int slot) {
    const auto* row = p.rows[cell];
    return std::max(0.0, field.beta_base() + (row ? (*row)[static_cast<std::size_t>(slot)] : 0.0));
}

// Real-valued masses per cell; a user leaving a cell carries an equal share
// of each of its compartments.
SimulationRun run_fractional(const Mobility& mob, const risk::RiskField& field, const EpidemicParams& params,
                             const Prepared& prep, std::uint64_t run_seed, std::size_t run_index,
                             const RunOptions& options) {
    if (!prep.screened.empty()) throw InvalidInput("screening needs stochastic mode");
    const EpidemicState seeded = init_state(mob, params, run_seed);
    EpidemicState occupancy(mob);
    std::vector<std::array<double, kCompartments>> mass(mob.cells(), {0.0, 0.0, 0.0, 0.0});
    for (std::uint32_t u = 0; u < mob.users(); ++u)
        mass[mob.initial_cell(u)][static_cast<std::size_t>(seeded.compartment(u))] += 1.0;

    SimulationRun run;
    run.run_index = run_index;
    run.rng_seed = run_seed;
    double cum = 0.0;
    std::size_t day = 0;
    const auto& calendar = mob.calendar();
    for (std::int64_t t = 0; t < mob.ticks(); ++t) {
        const int slot = field.slots().slot_of(mob.horizon().tick_time(t));
        for (std::uint32_t c = 0; c < mob.cells(); ++c) {
            auto& m = mass[c];
            const auto n = occupancy.occupants(c);
            if (n == 0 || (m[1] == 0.0 && m[2] == 0.0)) continue;
            const auto inc = seir_increments(m[0], m[1], m[2], static_cast<double>(n), beta_of(field, prep, c, slot), params);
            const double de = std::min(m[0], inc.to_e);
            const double di = std::min(m[1], inc.to_i);
            const double dr = std::min(m[2], inc.to_r);
            m = {m[0] - de, m[1] + de - di, m[2] + di - dr, m[3] + dr};
            cum += de;
        }
        if (options.observer) options.observer(occupancy, t);
        if (day < calendar.size() && t + 1 == calendar[day].end_tick) {
            DayCounts dc{calendar[day].local_day, 0, 0, 0, 0, cum, 0};
            for (const auto& m : mass) {
                dc.s += m[0];
                dc.e += m[1];
                dc.i += m[2];
                dc.r += m[3];
            }
            run.daily.push_back(dc);
            ++day;
        }
        for (const auto& mv : mob.moves_at(t + 1)) {
            const auto from = occupancy.cell_of(mv.user);
            const double n = static_cast<double>(occupancy.occupants(from));
            for (std::size_t k = 0; k < kCompartments; ++k) {
                const double share = mass[from][k] / n;
                mass[from][k] -= share;
                mass[mv.to][k] += share;
            }
            occupancy.move(mv.user, mv.to);
        }
    }
    return run;
}

} // namespace

SimulationRun run_simulation(const Mobility& mob, const risk::RiskField& field, const EpidemicParams& params,
                             const policy::ScreeningPlan& plan, std::uint64_t run_seed, std::size_t run_index,
                             const RunOptions& options) {
    const Prepared prep = prepare(mob, field, params, plan);
    if (options.mode == Mode::fractional) return run_fractional(mob, field, params, prep, run_seed, run_index, options);

    EpidemicState state = init_state(mob, params, run_seed);
    SimulationRun run;
    run.run_index = run_index;
    run.rng_seed = run_seed;
    std::uint64_t cum = 0;
    std::size_t day = 0;
    const auto& calendar = mob.calendar();
    const auto off = state.off_grid();
    for (std::int64_t t = 0; t < mob.ticks(); ++t) {
        const UtcSeconds now = mob.horizon().tick_time(t);
        const int slot = field.slots().slot_of(now);
        const StepContext ctx{&mob, t, run_index, options.record_events ? &run.events : nullptr};
        const auto tick = static_cast<std::uint64_t>(t);
        for (std::uint32_t c = 0; c < mob.cells(); ++c) {
            if (state.active(c) == 0) continue;
            SplitMix64 rng(derive_seed(run_seed, {tick, mob.cell(c).raw(), kContagionStream}));
            cum += contagion_step(state, c, beta_of(field, prep, c, slot), params, rng, ctx).to_e;
        }
        for (const auto& [c, id] : prep.screened) {
            if (state.count(c, Compartment::I) == 0) continue;
            const double p = plan.detect_prob(id, now);
            if (p <= 0.0) continue;
            SplitMix64 rng(derive_seed(run_seed, {tick, id.raw(), kScreeningStream}));
            screening_hook(state, c, p, rng, ctx, &run.detections);
        }
        if (state.active(off) > 0) {
            SplitMix64 rng(derive_seed(run_seed, {tick, 0, kOffGridStream}));
            contagion_step(state, off, 0.0, params, rng, ctx);
        }
        if (options.observer) options.observer(state, t);
        if (day < calendar.size() && t + 1 == calendar[day].end_tick) {
            run.daily.push_back(DayCounts{calendar[day].local_day, static_cast<double>(state.total(Compartment::S)),
                                          static_cast<double>(state.total(Compartment::E)),
                                          static_cast<double>(state.total(Compartment::I)),
                                          static_cast<double>(state.total(Compartment::R)), static_cast<double>(cum),
                                          static_cast<double>(state.quarantined_count())});
            ++day;
        }
        movement_step(state, mob, t);
    }
    return run;
}

} // namespace epimob::engine
