#include "epimob/policy/policy.hpp"

#include "epimob/error.hpp"
#include "epimob/parallel.hpp"
#include "epimob/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <unordered_map>

namespace epimob::policy {

const char* to_string(PolicyKind k) {
    switch (k) {
    case PolicyKind::lockdown: return "lockdown";
    case PolicyKind::telecommuting: return "telecommuting";
    case PolicyKind::screening: return "screening";
    }
    return "unknown";
}

namespace {

std::string idx(const char* base, std::size_t i) { return std::string(base) + "/" + std::to_string(i); }

void check_polygon(const GeoPolygon& p, const std::string& field) {
    try {
        p.validate();
    } catch (const InvalidInput& e) {
        throw InvalidInput(e.what(), field);
    }
}

// Tick range [first, last) covered by the policy, and the per-day pieces of it.
struct Range {
    std::int64_t first = 0;
    std::int64_t last = 0;
    struct Piece {
        std::uint32_t day; // calendar index
        std::int64_t begin;
        std::int64_t end;
    };
    std::vector<Piece> pieces;
};

Range tick_range(const PolicySpec& spec, const Horizon& h, const LocalClock& clock,
                 const std::vector<mobility::DaySlice>& calendar) {
    Range r;
    auto to_tick = [&](UtcSeconds t) {
        const auto k = (t - h.start + h.step - 1) / h.step;
        return std::clamp<std::int64_t>(k, 0, h.ticks());
    };
    r.first = to_tick(spec.begin(clock));
    r.last = to_tick(spec.end(clock));
    for (std::uint32_t d = 0; d < calendar.size(); ++d) {
        const auto a = std::max(calendar[d].begin_tick, r.first);
        const auto b = std::min(calendar[d].end_tick, r.last);
        if (a < b) r.pieces.push_back({d, a, b});
    }
    return r;
}

GeoPolygon resolve_region(const TelecommuteRegion& region, std::size_t i, const PolicyContext& ctx) {
    if (region.polygon) return *region.polygon;
    if (!ctx.districts) throw InvalidInput("district '" + region.district + "' given but no district table is loaded",
                                           idx("/regions", i) + "/district");
    auto it = ctx.districts->find(region.district);
    if (it == ctx.districts->end())
        throw InvalidInput("unknown district '" + region.district + "'", idx("/regions", i) + "/district");
    return it->second;
}

const geo::GridSystem& grid_of(const PolicyContext& ctx) {
    if (!ctx.grid) throw std::logic_error("policy context without a grid");
    return *ctx.grid;
}

std::vector<CellId> polygon_to_cells(const GeoPolygon& poly, const geo::GridSystem& grid, int res,
                                     const std::string& field) {
    try {
        return grid.cells_covering(poly, geo::Resolution(res));
    } catch (const InvalidInput& e) {
        throw InvalidInput(e.what(), field);
    }
}

} // namespace

void PolicySpec::validate() const {
    if (name.empty()) throw InvalidInput("policy name must not be empty", "/name");
    if (days < 1) throw InvalidInput("days must be at least 1", "/days");
    try {
        (void)parse_date(start);
    } catch (const InvalidInput& e) {
        throw InvalidInput(e.what(), "/start");
    }
    switch (kind) {
    case PolicyKind::lockdown:
        if (polygons.empty()) throw InvalidInput("lockdown needs at least one polygon", "/polygons");
        for (std::size_t i = 0; i < polygons.size(); ++i) check_polygon(polygons[i], idx("/polygons", i));
        break;
    case PolicyKind::telecommuting:
        if (regions.empty()) throw InvalidInput("telecommuting needs at least one region", "/regions");
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const auto& r = regions[i];
            if (!(r.reduction >= 0.0 && r.reduction <= 1.0))
                throw InvalidInput("reduction must lie in [0, 1]", idx("/regions", i) + "/reduction");
            if (r.polygon) {
                check_polygon(*r.polygon, idx("/regions", i) + "/polygon");
            } else if (r.district.empty()) {
                throw InvalidInput("region needs a polygon or a district", idx("/regions", i));
            }
        }
        break;
    case PolicyKind::screening:
        if (cells.empty()) throw InvalidInput("screening needs at least one cell", "/cells");
        if (!(detect_prob >= 0.0 && detect_prob <= 1.0))
            throw InvalidInput("detect_prob must lie in [0, 1]", "/detect_prob");
        break;
    }
}

UtcSeconds PolicySpec::begin(const LocalClock& clock) const {
    return clock.midnight_utc(parse_date(start).time_since_epoch().count());
}

UtcSeconds PolicySpec::end(const LocalClock& clock) const {
    return clock.midnight_utc(parse_date(start).time_since_epoch().count() + days);
}

void PolicySpec::check_within(const Horizon& horizon, const LocalClock& clock) const {
    if (begin(clock) < horizon.start || end(clock) > horizon.end) {
        throw InvalidInput("policy '" + name + "' runs " + start + " + " + std::to_string(days) +
                               " days, outside the simulation horizon",
                           "/start");
    }
}

namespace {

nlohmann::json ring_json(const GeoPolygon& p) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : p.ring()) r.push_back({v.lat, v.lon});
    return r;
}

GeoPolygon ring_from(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array()) throw InvalidInput("polygon must be a list of [lat, lon]", field);
    std::vector<geo::LatLon> ring;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& v = j[i];
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw InvalidInput("vertex must be [lat, lon]", idx(field.c_str(), i));
        ring.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return GeoPolygon(std::move(ring));
}

} // namespace

void to_json(nlohmann::json& j, const PolicySpec& p) {
    j = nlohmann::json{{"kind", to_string(p.kind)}, {"name", p.name}, {"start", p.start}, {"days", p.days},
                       {"rng_seed", p.rng_seed}};
    switch (p.kind) {
    case PolicyKind::lockdown: {
        auto& polys = j["polygons"] = nlohmann::json::array();
        for (const auto& poly : p.polygons) polys.push_back(ring_json(poly));
        break;
    }
    case PolicyKind::telecommuting: {
        auto& regions = j["regions"] = nlohmann::json::array();
        for (const auto& r : p.regions) {
            nlohmann::json o{{"reduction", r.reduction}};
            if (r.polygon) o["polygon"] = ring_json(*r.polygon);
            if (!r.district.empty()) o["district"] = r.district;
            regions.push_back(std::move(o));
        }
        break;
    }
    case PolicyKind::screening: {
        auto& cells = j["cells"] = nlohmann::json::array();
        for (CellId c : p.cells) cells.push_back(c.to_hex());
        j["detect_prob"] = p.detect_prob;
        break;
    }
    }
}

void from_json(const nlohmann::json& j, PolicySpec& p) {
    if (!j.is_object()) throw InvalidInput("policy must be an object");
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string())
            throw InvalidInput(std::string(key) + " must be a string", std::string("/") + key);
        return j[key].get<std::string>();
    };
    const auto kind = str("kind");
    if (kind == "lockdown") {
        p.kind = PolicyKind::lockdown;
    } else if (kind == "telecommuting") {
        p.kind = PolicyKind::telecommuting;
    } else if (kind == "screening") {
        p.kind = PolicyKind::screening;
    } else {
        throw InvalidInput("unknown policy kind '" + kind + "'", "/kind");
    }
    p.name = str("name");
    p.start = str("start");
    if (!j.contains("days") || !j["days"].is_number_integer()) throw InvalidInput("days must be an integer", "/days");
    p.days = j["days"].get<int>();
    if (j.contains("rng_seed")) {
        if (!j["rng_seed"].is_number_unsigned()) throw InvalidInput("rng_seed must be a non-negative integer", "/rng_seed");
        p.rng_seed = j["rng_seed"].get<std::uint64_t>();
    }
    p.polygons.clear();
    p.regions.clear();
    p.cells.clear();
    switch (p.kind) {
    case PolicyKind::lockdown:
        if (!j.contains("polygons") || !j["polygons"].is_array())
            throw InvalidInput("polygons must be a list", "/polygons");
        for (std::size_t i = 0; i < j["polygons"].size(); ++i)
            p.polygons.push_back(ring_from(j["polygons"][i], idx("/polygons", i)));
        break;
    case PolicyKind::telecommuting:
        if (!j.contains("regions") || !j["regions"].is_array()) throw InvalidInput("regions must be a list", "/regions");
        for (std::size_t i = 0; i < j["regions"].size(); ++i) {
            const auto& r = j["regions"][i];
            const auto base = idx("/regions", i);
            if (!r.is_object()) throw InvalidInput("region must be an object", base);
            TelecommuteRegion region;
            if (!r.contains("reduction") || !r["reduction"].is_number())
                throw InvalidInput("reduction must be a number", base + "/reduction");
            region.reduction = r["reduction"].get<double>();
            if (r.contains("polygon")) region.polygon = ring_from(r["polygon"], base + "/polygon");
            if (r.contains("district")) {
                if (!r["district"].is_string()) throw InvalidInput("district must be a string", base + "/district");
                region.district = r["district"].get<std::string>();
            }
            p.regions.push_back(std::move(region));
        }
        break;
    case PolicyKind::screening:
        if (!j.contains("cells") || !j["cells"].is_array()) throw InvalidInput("cells must be a list", "/cells");
        for (std::size_t i = 0; i < j["cells"].size(); ++i) {
            const auto& c = j["cells"][i];
            if (!c.is_string()) throw InvalidInput("cell must be a hex string", idx("/cells", i));
            try {
                p.cells.push_back(CellId::from_hex(c.get<std::string>()));
            } catch (const InvalidInput& e) {
                throw InvalidInput(e.what(), idx("/cells", i));
            }
        }
        if (j.contains("detect_prob")) {
            if (!j["detect_prob"].is_number()) throw InvalidInput("detect_prob must be a number", "/detect_prob");
            p.detect_prob = j["detect_prob"].get<double>();
        } else {
            p.detect_prob = kDefaultDetectProb;
        }
        break;
    }
    p.validate();
}

DistrictTable parse_district_table(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidInput("district table must be an object");
    DistrictTable t;
    for (const auto& [name, ring] : j.items()) {
        auto poly = ring_from(ring, "/" + name);
        check_polygon(poly, "/" + name);
        t.emplace(name, std::move(poly));
    }
    return t;
}

TransformResult apply_telecommuting(const mobility::TrajectorySet& ts, const std::vector<places::HomeWork>& hw,
                                    const PolicySpec& spec, const PolicyContext& ctx) {
    if (spec.kind != PolicyKind::telecommuting) throw InvalidInput("not a telecommuting policy", "/kind");
    spec.validate();
    spec.check_within(ts.horizon(), ctx.clock);
    const auto& grid = grid_of(ctx);
    const auto calendar = mobility::day_slices(ts.horizon(), ctx.clock);
    const Range range = tick_range(spec, ts.horizon(), ctx.clock, calendar);

    TransformResult out;
    struct Target {
        std::size_t user;
        CellId home;
        CellId work;
    };
    std::vector<Target> targets;
    std::set<std::size_t> taken;
    std::vector<const places::HomeWork*> workers;
    for (const auto& h : hw) workers.push_back(&h);
    std::sort(workers.begin(), workers.end(), [](auto* a, auto* b) { return a->uid < b->uid; });

    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        const auto poly = resolve_region(spec.regions[i], i, ctx);
        const geo::CellSet cells(polygon_to_cells(poly, grid, ts.resolution(), idx("/regions", i) + "/polygon"));
        if (cells.empty()) {
            out.warnings.push_back("policy '" + spec.name + "' region " + std::to_string(i) + " covers no cells");
            continue;
        }
        std::vector<Target> candidates;
        for (const auto* h : workers) {
            if (!cells.contains(h->work_cell)) continue;
            const auto u = ts.find(h->uid);
            if (!u || taken.count(*u)) continue;
            candidates.push_back({*u, h->home_cell, h->work_cell});
        }
        const auto n = candidates.size();
        const auto m = static_cast<std::size_t>(std::llround(spec.regions[i].reduction * static_cast<double>(n)));
        SplitMix64 rng(derive_seed(spec.rng_seed, {0x7465ULL, i}));
        for (std::size_t k = 0; k < m; ++k) {
            const auto pick = k + static_cast<std::size_t>(rng.below(n - k));
            std::swap(candidates[k], candidates[pick]);
            taken.insert(candidates[k].user);
            targets.push_back(candidates[k]);
        }
    }

    auto trajs = mobility::TrajectorySet(ts).release();
    const std::int64_t hour_ticks = (3600 + ts.horizon().step - 1) / ts.horizon().step;
    std::atomic<std::size_t> replaced{0};
    parallel_for(targets.size(), ctx.workers, [&](std::size_t t) {
        auto& cells = trajs[targets[t].user].cells;
        for (const auto& piece : range.pieces) {
            std::int64_t at_work = 0;
            for (auto k = piece.begin; k < piece.end; ++k) at_work += cells[static_cast<std::size_t>(k)] == targets[t].work;
            if (at_work < hour_ticks) continue;
            std::fill(cells.begin() + piece.begin, cells.begin() + piece.end, targets[t].home);
            replaced.fetch_add(1, std::memory_order_relaxed);
        }
    });
    for (const auto& t : targets) out.affected.push_back(ts.at(t.user).uid);
    std::sort(out.affected.begin(), out.affected.end());
    out.days_replaced = replaced.load();
    out.trajectories = mobility::TrajectorySet(ts.horizon(), ts.resolution(), std::move(trajs));
    return out;
}

LockdownResult apply_lockdown(const mobility::TrajectorySet& ts, const mobility::HistoryIndex& index,
                              const PolicySpec& spec, const PolicyContext& ctx,
                              const std::vector<places::HomeWork>* hw) {
    if (spec.kind != PolicyKind::lockdown) throw InvalidInput("not a lockdown policy", "/kind");
    spec.validate();
    spec.check_within(ts.horizon(), ctx.clock);
    if (index.users() != ts.size()) throw InvalidInput("history index does not match the trajectories");
    const auto& grid = grid_of(ctx);
    const auto& calendar = index.calendar();
    const Range range = tick_range(spec, ts.horizon(), ctx.clock, calendar);

    std::vector<CellId> all;
    for (std::size_t i = 0; i < spec.polygons.size(); ++i) {
        auto c = polygon_to_cells(spec.polygons[i], grid, ts.resolution(), idx("/polygons", i));
        all.insert(all.end(), c.begin(), c.end());
    }
    const geo::CellSet locked(std::move(all));

    LockdownResult out;
    if (locked.empty() || range.first >= range.last) {
        if (locked.empty()) out.warnings.push_back("policy '" + spec.name + "' covers no cells");
        out.trajectories = ts;
        return out;
    }

    std::unordered_map<std::string, CellId> homes;
    if (hw)
        for (const auto& h : *hw) homes.emplace(h.uid, h.home_cell);

    enum class Fate : std::uint8_t { untouched, frozen, rerouted };
    std::vector<Fate> fate(ts.size(), Fate::untouched);
    std::vector<std::size_t> replaced_days(ts.size(), 0);
    std::vector<std::size_t> fallbacks(ts.size(), 0);
    auto trajs = mobility::TrajectorySet(ts).release();
    const Horizon& h = ts.horizon();

    parallel_for(ts.size(), ctx.workers, [&](std::size_t u) {
        const auto& src = ts.at(u).cells;
        auto& cells = trajs[u].cells;
        const CellId at_start = src[static_cast<std::size_t>(range.first)];
        if (locked.contains(at_start)) {
            std::fill(cells.begin() + range.first, cells.begin() + range.last, at_start);
            fate[u] = Fate::frozen;
            return;
        }
        std::optional<std::vector<std::uint32_t>> clean;
        for (const auto& piece : range.pieces) {
            bool touches = false;
            for (auto k = piece.begin; k < piece.end && !touches; ++k)
                touches = locked.contains(src[static_cast<std::size_t>(k)]);
            if (!touches) continue;
            fate[u] = Fate::rerouted;
            ++replaced_days[u];
            if (!clean) clean = index.days_avoiding(static_cast<std::uint32_t>(u), locked);
            if (!clean->empty()) {
                SplitMix64 rng(derive_seed(spec.rng_seed, {fnv1a64(ts.at(u).uid), piece.day}));
                const auto& from = calendar[(*clean)[rng.below(clean->size())]];
                const UtcSeconds midnight = ctx.clock.midnight_utc(calendar[piece.day].local_day);
                for (auto k = piece.begin; k < piece.end; ++k) {
                    const auto offset = (h.tick_time(k) - midnight) / h.step;
                    cells[static_cast<std::size_t>(k)] = src[static_cast<std::size_t>(from.begin_tick + offset)];
                }
            } else {
                ++fallbacks[u];
                CellId stay = at_start;
                auto home = homes.find(ts.at(u).uid);
                if (home != homes.end() && !locked.contains(home->second)) {
                    stay = home->second;
                } else if (!locked.contains(src[static_cast<std::size_t>(piece.begin)])) {
                    stay = src[static_cast<std::size_t>(piece.begin)];
                }
                std::fill(cells.begin() + piece.begin, cells.begin() + piece.end, stay);
            }
        }
    });

    for (std::size_t u = 0; u < ts.size(); ++u) {
        if (fate[u] == Fate::untouched) continue;
        out.affected.push_back(ts.at(u).uid);
        if (fate[u] == Fate::frozen) out.frozen.push_back(ts.at(u).uid);
        out.days_replaced += replaced_days[u];
        out.fallback_days += fallbacks[u];
    }
    out.trajectories = mobility::TrajectorySet(h, ts.resolution(), std::move(trajs));
    return out;
}

void ScreeningPlan::add(CellId cell, ScreeningWindow window) {
    auto& w = windows_[cell];
    if (std::find(w.begin(), w.end(), window) == w.end()) w.push_back(window);
}

void ScreeningPlan::merge(const ScreeningPlan& other) {
    for (const auto& [cell, ws] : other.windows_)
        for (const auto& w : ws) add(cell, w);
}

std::vector<CellId> ScreeningPlan::cells() const {
    std::vector<CellId> out;
    for (const auto& [c, w] : windows_) out.push_back(c);
    return out;
}

double ScreeningPlan::detect_prob(CellId cell, UtcSeconds t) const {
    auto it = windows_.find(cell);
    if (it == windows_.end()) return 0.0;
    double p = 0.0;
    for (const auto& w : it->second)
        if (t >= w.begin && t < w.end) p = std::max(p, w.detect_prob);
    return p;
}

void to_json(nlohmann::json& j, const ScreeningPlan& p) {
    j = nlohmann::json::object();
    for (const auto& [cell, ws] : p.windows()) {
        auto& arr = j[cell.to_hex()] = nlohmann::json::array();
        for (const auto& w : ws) arr.push_back({{"begin", w.begin}, {"end", w.end}, {"detect_prob", w.detect_prob}});
    }
}

void from_json(const nlohmann::json& j, ScreeningPlan& p) {
    p = ScreeningPlan{};
    for (const auto& [hex, arr] : j.items()) {
        for (const auto& w : arr) {
            p.add(CellId::from_hex(hex),
                  ScreeningWindow{w.at("begin").get<UtcSeconds>(), w.at("end").get<UtcSeconds>(), w.at("detect_prob").get<double>()});
        }
    }
}

ScreeningPlan compile_screening(const PolicySpec& spec, const Horizon& horizon, const PolicyContext& ctx) {
    if (spec.kind != PolicyKind::screening) throw InvalidInput("not a screening policy", "/kind");
    spec.validate();
    spec.check_within(horizon, ctx.clock);
    ScreeningPlan plan;
    for (std::size_t i = 0; i < spec.cells.size(); ++i) {
        if (ctx.grid && !ctx.grid->is_valid(spec.cells[i]))
            throw InvalidInput("not a valid cell id for this grid", idx("/cells", i));
        plan.add(spec.cells[i], ScreeningWindow{spec.begin(ctx.clock), spec.end(ctx.clock), spec.detect_prob});
    }
    return plan;
}

RestrictedMobilityPlan compose_plan(const mobility::TrajectorySet& ts, const std::vector<PolicySpec>& policies,
                                    const std::vector<places::HomeWork>& hw, const PolicyContext& ctx) {
    std::map<std::string, const PolicySpec*> by_name;
    std::vector<const PolicySpec*> unique;
    for (std::size_t i = 0; i < policies.size(); ++i) {
        const auto base = idx("/policies", i);
        try {
            policies[i].validate();
            policies[i].check_within(ts.horizon(), ctx.clock);
        } catch (const InvalidInput& e) {
            throw InvalidInput(e.what(), base + e.field());
        }
        auto [it, inserted] = by_name.emplace(policies[i].name, &policies[i]);
        if (!inserted) {
            if (!(*it->second == policies[i]))
                throw InvalidInput("two different policies are both named '" + policies[i].name + "'", base + "/name");
            continue;
        }
        unique.push_back(&policies[i]);
    }

    RestrictedMobilityPlan plan;
    std::optional<mobility::TrajectorySet> current;
    auto now = [&]() -> const mobility::TrajectorySet& { return current ? *current : ts; };
    auto wrap = [&](std::size_t i, auto&& fn) {
        try {
            fn();
        } catch (const InvalidInput& e) {
            throw InvalidInput(e.what(), idx("/policies", i) + e.field());
        }
    };
    auto position = [&](const PolicySpec* p) { return static_cast<std::size_t>(p - policies.data()); };

    for (const auto* p : unique) {
        if (p->kind != PolicyKind::telecommuting) continue;
        wrap(position(p), [&] {
            auto r = apply_telecommuting(now(), hw, *p, ctx);
            plan.warnings.insert(plan.warnings.end(), r.warnings.begin(), r.warnings.end());
            current = std::move(r.trajectories);
        });
        plan.provenance.push_back(*p);
    }
    for (const auto* p : unique) {
        if (p->kind != PolicyKind::lockdown) continue;
        wrap(position(p), [&] {
            const mobility::HistoryIndex index(now(), ctx.clock);
            auto r = apply_lockdown(now(), index, *p, ctx, &hw);
            plan.warnings.insert(plan.warnings.end(), r.warnings.begin(), r.warnings.end());
            current = std::move(r.trajectories);
        });
        plan.provenance.push_back(*p);
    }
    for (const auto* p : unique) {
        if (p->kind != PolicyKind::screening) continue;
        wrap(position(p), [&] { plan.screening.merge(compile_screening(*p, ts.horizon(), ctx)); });
        plan.provenance.push_back(*p);
    }
    plan.trajectories = current ? std::move(*current) : ts;
    return plan;
}

} // namespace epimob::policy
