#include "epimob/engine/ensemble.hpp"

#include "epimob/error.hpp"
#include "epimob/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace epimob::engine {

std::vector<const SimulationRun*> EnsembleResult::kept_runs() const {
    std::vector<const SimulationRun*> out;
    for (auto k : kept) out.push_back(&runs.at(k));
    return out;
}

double percentile(std::vector<double> xs, double q) {
    if (xs.empty()) throw InvalidInput("percentile of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

std::uint64_t run_seed(std::uint64_t base, std::size_t run_index) { return derive_seed(base, {0x72756eULL, run_index}); }

void summarize(EnsembleResult& r) {
    r.kept.clear();
    r.days.clear();
    if (r.runs.empty()) return;
    std::vector<double> totals;
    for (const auto& run : r.runs) totals.push_back(run.total_infections());
    // Filter bounds are the order statistics enclosing the 2.5th and 97.5th
    // percentiles; interpolated bounds would drop every run when m = 2.
    std::vector<double> sorted = totals;
    std::sort(sorted.begin(), sorted.end());
    const double last = static_cast<double>(sorted.size() - 1);
    r.total_lo = sorted[static_cast<std::size_t>(std::floor(0.025 * last))];
    r.total_hi = sorted[static_cast<std::size_t>(std::ceil(0.975 * last))];
    for (std::size_t k = 0; k < r.runs.size(); ++k)
        if (totals[k] >= r.total_lo && totals[k] <= r.total_hi) r.kept.push_back(k);

    const std::size_t n_days = r.runs.front().daily.size();
    for (std::size_t d = 0; d < n_days; ++d) {
        DayBand band;
        band.local_day = r.runs.front().daily[d].local_day;
        std::vector<double> cum;
        for (auto k : r.kept) {
            const auto& dc = r.runs[k].daily.at(d);
            cum.push_back(dc.cum_infections);
            band.s += dc.s;
            band.e += dc.e;
            band.i += dc.i;
            band.r += dc.r;
        }
        const auto n = static_cast<double>(r.kept.size());
        for (double* v : {&band.s, &band.e, &band.i, &band.r}) *v /= n;
        for (double v : cum) band.mean += v;
        band.mean /= n;
        // Percentiles of a skewed sample can sit on the far side of the mean.
        band.lo = std::min(percentile(cum, 0.025), band.mean);
        band.hi = std::max(percentile(cum, 0.975), band.mean);
        r.days.push_back(band);
    }
}

EnsembleResult run_ensemble(const Mobility& mob, const risk::RiskField& field, const EpidemicParams& params,
                            const policy::ScreeningPlan& plan, int m, const EnsembleOptions& options) {
    if (m < 2) throw InvalidInput("an ensemble needs at least 2 runs", "/m");
    params.validate();
    EnsembleResult r;
    r.horizon = mob.horizon();
    r.clock = mob.clock();
    r.resolution = mob.resolution();
    r.population = mob.users();
    r.params = params;
    r.runs.resize(static_cast<std::size_t>(m));
    RunOptions ro;
    ro.record_events = options.record_events;
    std::atomic<std::size_t> done{0};
    parallel_for(r.runs.size(), options.workers, [&](std::size_t k) {
        r.runs[k] = run_simulation(mob, field, params, plan, run_seed(params.rng_seed, k), k, ro);
        const auto finished = done.fetch_add(1) + 1;
        if (options.progress) options.progress(finished, r.runs.size());
    });
    summarize(r);
    return r;
}

void write_events_jsonl(std::ostream& out, const EnsembleResult& result) {
    for (const auto& run : result.runs) {
        for (const auto& e : run.events) {
            out << nlohmann::json{{"run", e.run}, {"uid", e.uid}, {"t", e.t}, {"cell", e.cell.to_hex()}}.dump() << '\n';
        }
    }
}

void write_daily_csv(std::ostream& out, const EnsembleResult& result) {
    out << "run,day,S,E,I,R,cum_infections\n";
    char buf[256];
    for (const auto& run : result.runs) {
        for (std::size_t d = 0; d < run.daily.size(); ++d) {
            const auto& c = run.daily[d];
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", run.run_index, d, c.s, c.e, c.i,
                          c.r, c.cum_infections);
            out << buf;
        }
    }
}

void to_json(nlohmann::json& j, const EnsembleResult& r) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : r.runs) {
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : run.events) events.push_back({e.uid, e.t, e.cell.to_hex()});
        nlohmann::json detections = nlohmann::json::array();
        for (const auto& d : run.detections) detections.push_back({d.uid, d.t, d.cell.to_hex()});
        nlohmann::json daily = nlohmann::json::array();
        for (const auto& d : run.daily) daily.push_back({d.local_day, d.s, d.e, d.i, d.r, d.cum_infections, d.quarantined});
        runs.push_back({{"run_index", run.run_index},
                        {"rng_seed", run.rng_seed},
                        {"events", std::move(events)},
                        {"detections", std::move(detections)},
                        {"daily", std::move(daily)}});
    }
    nlohmann::json days = nlohmann::json::array();
    for (const auto& d : r.days) days.push_back({d.local_day, d.mean, d.lo, d.hi, d.s, d.e, d.i, d.r});
    j = nlohmann::json{{"fingerprint", r.fingerprint},
                       {"horizon", {{"start", r.horizon.start}, {"end", r.horizon.end}, {"step", r.horizon.step}}},
                       {"utc_offset_s", r.clock.utc_offset_s},
                       {"resolution", r.resolution},
                       {"population", r.population},
                       {"params", r.params},
                       {"runs", std::move(runs)},
                       {"kept", r.kept},
                       {"total_lo", r.total_lo},
                       {"total_hi", r.total_hi},
                       {"days", std::move(days)}};
}

void from_json(const nlohmann::json& j, EnsembleResult& r) {
    r = EnsembleResult{};
    r.fingerprint = j.at("fingerprint").get<std::string>();
    const auto& h = j.at("horizon");
    r.horizon.start = h.at("start").get<UtcSeconds>();
    r.horizon.end = h.at("end").get<UtcSeconds>();
    r.horizon.step = h.at("step").get<int>();
    r.clock.utc_offset_s = j.at("utc_offset_s").get<int>();
    r.resolution = j.at("resolution").get<int>();
    r.population = j.at("population").get<std::size_t>();
    r.params = j.at("params").get<EpidemicParams>();
    for (const auto& jr : j.at("runs")) {
        SimulationRun run;
        run.run_index = jr.at("run_index").get<std::size_t>();
        run.rng_seed = jr.at("rng_seed").get<std::uint64_t>();
        for (const auto& e : jr.at("events"))
            run.events.push_back(
                {e.at(0).get<std::string>(), e.at(1).get<UtcSeconds>(), CellId::from_hex(e.at(2).get<std::string>()), run.run_index});
        for (const auto& d : jr.at("detections"))
            run.detections.push_back(
                {d.at(0).get<std::string>(), d.at(1).get<UtcSeconds>(), CellId::from_hex(d.at(2).get<std::string>())});
        for (const auto& d : jr.at("daily"))
            run.daily.push_back({d.at(0).get<std::int64_t>(), d.at(1).get<double>(), d.at(2).get<double>(),
                                 d.at(3).get<double>(), d.at(4).get<double>(), d.at(5).get<double>(), d.at(6).get<double>()});
        r.runs.push_back(std::move(run));
    }
    r.kept = j.at("kept").get<std::vector<std::size_t>>();
    r.total_lo = j.at("total_lo").get<double>();
    r.total_hi = j.at("total_hi").get<double>();
    for (const auto& d : j.at("days"))
        r.days.push_back({d.at(0).get<std::int64_t>(), d.at(1).get<double>(), d.at(2).get<double>(), d.at(3).get<double>(),
                          d.at(4).get<double>(), d.at(5).get<double>(), d.at(6).get<double>(), d.at(7).get<double>()});
}

} // namespace epimob::engine
