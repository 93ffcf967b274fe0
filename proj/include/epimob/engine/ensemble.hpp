#pragma once

#include "epimob/engine/engine.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace epimob::engine {

// Per-day statistics over the kept runs.
struct DayBand {
    std::int64_t local_day = 0;
    double mean = 0.0; // cumulative infections
    double lo = 0.0;
    double hi = 0.0;
    double s = 0.0; // compartment means
    double e = 0.0;
    double i = 0.0;
    double r = 0.0;

    friend bool operator==(const DayBand&, const DayBand&) = default;
};

struct EnsembleResult {
    std::string fingerprint;
    Horizon horizon;
    LocalClock clock;
    int resolution = 8;
    std::size_t population = 0;
    EpidemicParams params;
    std::vector<SimulationRun> runs;
    std::vector<std::size_t> kept; // indices into runs, ascending
    double total_lo = 0.0;         // CI filter bounds on run totals
    double total_hi = 0.0;
    std::vector<DayBand> days;

    std::vector<const SimulationRun*> kept_runs() const;

    friend bool operator==(const EnsembleResult&, const EnsembleResult&) = default;
};

struct EnsembleOptions {
    unsigned workers = 1;
    bool record_events = true;
    // Called with the number of finished runs; may come from any worker thread.
    std::function<void(std::size_t done, std::size_t total)> progress;
};

// Linear-interpolated empirical percentile, q in [0, 1].
double percentile(std::vector<double> xs, double q);

// Seed of run i for a base seed.
std::uint64_t run_seed(std::uint64_t base, std::size_t run_index);

// m runs with derived seeds, CI filtering on total infections, per-day bands.
EnsembleResult run_ensemble(const Mobility& mob, const risk::RiskField& field, const EpidemicParams& params,
                            const policy::ScreeningPlan& plan, int m, const EnsembleOptions& options = {});

// Recomputes kept, total_lo/hi and days from runs.
void summarize(EnsembleResult& result);

// JSON Lines {"run", "uid", "t", "cell"} for every event of every run.
void write_events_jsonl(std::ostream& out, const EnsembleResult& result);
// CSV run,day,S,E,I,R,cum_infections.
void write_daily_csv(std::ostream& out, const EnsembleResult& result);

void to_json(nlohmann::json& j, const EnsembleResult& r);
void from_json(const nlohmann::json& j, EnsembleResult& r);

} // namespace epimob::engine
