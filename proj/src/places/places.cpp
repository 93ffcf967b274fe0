#include "epimob/places/places.hpp"

#include "epimob/error.hpp"
#include "epimob/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace epimob::places {

std::vector<StayPoint> extract_stay_points(const mobility::RawTrajectory& raw, const geo::GridSystem& grid,
                                           geo::Resolution res, const StayOptions& options) {
    std::vector<StayPoint> out;
    const auto& pts = raw.points;
    std::size_t i = 0;
    while (i < pts.size()) {
        std::size_t j = i + 1;
        while (j < pts.size() && geo::haversine_m(pts[i].pos, pts[j].pos) <= options.radius_m) ++j;
        if (pts[j - 1].t - pts[i].t >= options.min_duration) {
            out.push_back(StayPoint{raw.uid, grid.cell_of(pts[i].pos, res), pts[i].t, pts[j - 1].t, pts[i].pos});
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

const char* to_string(HomeWorkRejection r) {
    switch (r) {
    case HomeWorkRejection::none: return "accepted";
    case HomeWorkRejection::no_stay_points: return "no_stay_points";
    case HomeWorkRejection::low_home_rate: return "low_home_rate";
    case HomeWorkRejection::low_work_rate: return "low_work_rate";
    case HomeWorkRejection::same_cell: return "same_cell";
    }
    return "unknown";
}

namespace {

UtcSeconds overlap(UtcSeconds a0, UtcSeconds a1, UtcSeconds b0, UtcSeconds b1) {
    return std::max<UtcSeconds>(0, std::min(a1, b1) - std::max(a0, b0));
}

struct Windows {
    const HomeWorkOptions& opt;

    // Calls fn(home_begin, home_end, work_begin, work_end) per local day; an
    // empty work window marks a day that does not count for work.
    template <typename Fn>
    void each_day(UtcSeconds from, UtcSeconds to, Fn&& fn) const {
        if (to <= from) return;
        for (auto d = opt.clock.local_day(from); d <= opt.clock.local_day(to - 1); ++d) {
            const UtcSeconds mid = opt.clock.midnight_utc(d);
            const bool counts = !opt.work_weekdays_only || LocalClock::weekday_of_day(d) < 5;
            fn(mid + opt.home_begin_s, mid + opt.home_end_s, mid + opt.work_begin_s,
               counts ? mid + opt.work_end_s : mid + opt.work_begin_s);
        }
    }
};

std::pair<CellId, UtcSeconds> top_cell(const std::map<CellId, UtcSeconds>& totals) {
    std::pair<CellId, UtcSeconds> best{CellId{}, 0};
    for (const auto& [cell, secs] : totals)
        if (secs > best.second) best = {cell, secs}; // ascending map: ties keep the smaller id
    return best;
}

} // namespace

HomeWorkResult extract_home_work(const mobility::RawTrajectory& raw, const Horizon& horizon,
                                 const geo::GridSystem& grid, geo::Resolution res, const HomeWorkOptions& options) {
    HomeWorkResult result;
    result.candidate.uid = raw.uid;
    const auto stays = extract_stay_points(raw, grid, res, options.stay);
    if (stays.empty()) {
        result.rejection = HomeWorkRejection::no_stay_points;
        return result;
    }
    const Windows windows{options};
    UtcSeconds home_total = 0;
    UtcSeconds work_total = 0;
    windows.each_day(horizon.start, horizon.end, [&](UtcSeconds h0, UtcSeconds h1, UtcSeconds w0, UtcSeconds w1) {
        home_total += overlap(h0, h1, horizon.start, horizon.end);
        work_total += overlap(w0, w1, horizon.start, horizon.end);
    });

    std::map<CellId, UtcSeconds> home_secs;
    std::map<CellId, UtcSeconds> work_secs;
    for (const auto& s : stays) {
        const UtcSeconds a = std::max(s.arrive, horizon.start);
        const UtcSeconds b = std::min(s.depart, horizon.end);
        windows.each_day(a, b, [&](UtcSeconds h0, UtcSeconds h1, UtcSeconds w0, UtcSeconds w1) {
            if (auto o = overlap(a, b, h0, h1); o > 0) home_secs[s.cell] += o;
            if (auto o = overlap(a, b, w0, w1); o > 0) work_secs[s.cell] += o;
        });
    }
    const auto [home, home_s] = top_cell(home_secs);
    const auto [work, work_s] = top_cell(work_secs);
    auto& c = result.candidate;
    c.home_cell = home;
    c.work_cell = work;
    c.home_rate = home_total > 0 ? static_cast<double>(home_s) / static_cast<double>(home_total) : 0.0;
    c.work_rate = work_total > 0 ? static_cast<double>(work_s) / static_cast<double>(work_total) : 0.0;
    if (c.home_rate < options.threshold) {
        result.rejection = HomeWorkRejection::low_home_rate;
    } else if (c.work_rate < options.threshold) {
        result.rejection = HomeWorkRejection::low_work_rate;
    } else if (home == work && !options.allow_same_cell) {
        result.rejection = HomeWorkRejection::same_cell;
    }
    return result;
}

HomeWorkBatch extract_home_work_all(const std::vector<mobility::RawTrajectory>& raws, const Horizon& horizon,
                                    const geo::GridSystem& grid, geo::Resolution res,
                                    const HomeWorkOptions& options, unsigned workers) {
    std::vector<HomeWorkResult> results(raws.size());
    parallel_for(raws.size(), workers,
                 [&](std::size_t i) { results[i] = extract_home_work(raws[i], horizon, grid, res, options); });
    HomeWorkBatch batch;
    for (auto& r : results) {
        if (r.accepted()) {
            batch.accepted.push_back(std::move(r.candidate));
        } else {
            batch.rejected[r.candidate.uid] = r.rejection;
        }
    }
    std::sort(batch.accepted.begin(), batch.accepted.end(),
              [](const HomeWork& a, const HomeWork& b) { return a.uid < b.uid; });
    return batch;
}

std::map<CellId, std::size_t> workplace_heatmap(const std::vector<HomeWork>& hw, const geo::GridSystem& grid,
                                                geo::Resolution res) {
    std::map<CellId, std::size_t> counts;
    for (const auto& h : hw) {
        const int level = grid.resolution_of(h.work_cell).level();
        if (level < res.level())
            throw InvalidInput("heatmap resolution finer than the work cells", "res");
        const CellId c = level == res.level() ? h.work_cell : grid.parent_cell(h.work_cell, res);
        ++counts[c];
    }
    return counts;
}

void write_home_work_csv(std::ostream& out, const std::vector<HomeWork>& hw) {
    out << "uid,home_cell,work_cell,home_rate,work_rate\n";
    char buf[64];
    for (const auto& h : hw) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", h.home_rate, h.work_rate);
        out << h.uid << ',' << h.home_cell.to_hex() << ',' << h.work_cell.to_hex() << ',' << buf << '\n';
    }
}

} // namespace epimob::places
