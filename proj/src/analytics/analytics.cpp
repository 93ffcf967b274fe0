#include "epimob/analytics/analytics.hpp"

#include "epimob/error.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

namespace epimob::analytics {

CurveSeries cumulative_curve(const engine::EnsembleResult& er, std::string name, std::vector<std::string> clips) {
    if (er.kept.empty()) throw InvalidInput("result has no kept runs");
    CurveSeries c;
    c.name = std::move(name);
    c.clips = std::move(clips);
    for (const auto& d : er.days) c.points.push_back({d.local_day, d.mean, d.lo, d.hi});
    return c;
}

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

} // namespace

std::vector<std::string> config_clips(const EpidemicParams& params, const std::vector<policy::PolicySpec>& policies) {
    std::vector<std::string> out{fmt("beta %g", params.beta_global), fmt("sigma %g", params.sigma),
                                 fmt("gamma %g", params.gamma), "i0 " + std::to_string(params.i0)};
    for (const auto& p : policies) {
        std::string s = std::string(policy::to_string(p.kind)) + " " + p.name + " " + p.start + " +" +
                        std::to_string(p.days) + "d";
        if (p.kind == policy::PolicyKind::telecommuting) {
            for (const auto& r : p.regions)
                s += " " + (r.district.empty() ? std::string("region") : r.district) + fmt(" %g%%", 100.0 * r.reduction);
        } else if (p.kind == policy::PolicyKind::screening) {
            s += " " + std::to_string(p.cells.size()) + " cells" + fmt(" p=%g", p.detect_prob);
        }
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

CellId aggregate(const geo::GridSystem& grid, CellId c, geo::Resolution res) {
    const auto own = grid.resolution_of(c);
    if (own == res) return c;
    return grid.parent_cell(c, res);
}

void check_resolution(const engine::EnsembleResult& er, geo::Resolution res) {
    if (res.level() > er.resolution)
        throw InvalidInput("resolution " + std::to_string(res.level()) + " is finer than the simulation's " +
                               std::to_string(er.resolution),
                           "res");
}

} // namespace

std::vector<SeverityCluster> severity_clusters(const engine::EnsembleResult& er, const geo::GridSystem& grid,
                                               geo::Resolution res) {
    check_resolution(er, res);
    std::map<CellId, std::size_t> counts;
    for (const auto* run : er.kept_runs())
        for (const auto& e : run->events) ++counts[aggregate(grid, e.cell, res)];
    std::vector<std::size_t> sorted;
    for (const auto& [c, n] : counts) sorted.push_back(n);
    std::sort(sorted.begin(), sorted.end());
    // Tercile edges of the cluster counts.
    const auto edge = [&](double q) { return sorted.empty() ? 0 : sorted[static_cast<std::size_t>(q * (sorted.size() - 1))]; };
    const std::size_t low = edge(1.0 / 3.0);
    const std::size_t mid = edge(2.0 / 3.0);
    std::vector<SeverityCluster> out;
    for (const auto& [c, n] : counts) out.push_back({c, n, n <= low ? "green" : n <= mid ? "orange" : "red"});
    return out;
}

nlohmann::json severity_payload(const std::vector<SeverityCluster>& clusters, const engine::EnsembleResult& er,
                                const geo::GridSystem& grid, geo::Resolution res, bool per_run) {
    const double kept = static_cast<double>(std::max<std::size_t>(1, er.kept.size()));
    nlohmann::json features = nlohmann::json::array();
    std::size_t total = 0;
    for (const auto& c : clusters) {
        total += c.count;
        nlohmann::json ring = nlohmann::json::array();
        for (const auto& [lon, lat] : geo::geojson_ring(grid, c.cell)) ring.push_back({lon, lat});
        features.push_back({{"cell", c.cell.to_hex()},
                            {"count", c.count},
                            {"value", per_run ? static_cast<double>(c.count) / kept : static_cast<double>(c.count)},
                            {"color", c.color},
                            {"polygon", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}}});
    }
    return {{"resolution", res.level()},
            {"kept_runs", er.kept.size()},
            {"per_run", per_run},
            {"total", total},
            {"clusters", std::move(features)}};
}

HourlyHistogram hourly_histogram(const engine::EnsembleResult& er, const geo::GridSystem& grid,
                                 const std::vector<CellId>& region) {
    if (region.empty()) throw InvalidInput("region must contain at least one cell", "region");
    std::map<int, std::set<CellId>> by_level;
    for (CellId c : region) {
        const auto level = grid.resolution_of(c).level();
        if (level > er.resolution) throw InvalidInput("region cell " + c.to_hex() + " is finer than the simulation", "region");
        by_level[level].insert(c);
    }
    std::array<std::size_t, 24> counts{};
    HourlyHistogram h;
    for (const auto* run : er.kept_runs()) {
        for (const auto& e : run->events) {
            bool inside = false;
            for (const auto& [level, cells] : by_level) {
                if (cells.count(aggregate(grid, e.cell, geo::Resolution(level)))) {
                    inside = true;
                    break;
                }
            }
            if (!inside) continue;
            ++counts[static_cast<std::size_t>(er.clock.hour_of_day(e.t))];
            ++h.total;
        }
    }
    if (h.total > 0)
        for (std::size_t k = 0; k < 24; ++k) h.percent[k] = 100.0 * static_cast<double>(counts[k]) / static_cast<double>(h.total);
    return h;
}

void to_json(nlohmann::json& j, const CurveSeries& c) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : c.points)
        points.push_back({{"day", p.local_day},
                          {"date", format_date(std::chrono::sys_days(std::chrono::days(p.local_day)))},
                          {"mean", p.mean},
                          {"lo", p.lo},
                          {"hi", p.hi}});
    j = {{"name", c.name}, {"clips", c.clips}, {"points", std::move(points)}};
}

void from_json(const nlohmann::json& j, CurveSeries& c) {
    c = CurveSeries{};
    c.name = j.at("name").get<std::string>();
    c.clips = j.at("clips").get<std::vector<std::string>>();
    for (const auto& p : j.at("points"))
        c.points.push_back({p.at("day").get<std::int64_t>(), p.at("mean").get<double>(), p.at("lo").get<double>(),
                            p.at("hi").get<double>()});
}

void to_json(nlohmann::json& j, const HourlyHistogram& h) {
    j = {{"bins", h.percent}, {"total", h.total}, {"no_data", h.no_data()}};
}

Comparison compare_policies(const std::vector<NamedResult>& results, const std::string& name) {
    if (results.size() < 2) throw InvalidInput("a comparison needs at least two results", "job_ids");
    const auto& first = *results.front().result;
    for (std::size_t i = 1; i < results.size(); ++i) {
        const auto& r = *results[i].result;
        if (!(r.horizon == first.horizon) || !(r.clock == first.clock)) {
            throw InvalidInput("horizon differs: " + results[0].name + " covers " + format_timestamp(first.horizon.start) +
                                   " to " + format_timestamp(first.horizon.end) + ", " + results[i].name + " covers " +
                                   format_timestamp(r.horizon.start) + " to " + format_timestamp(r.horizon.end),
                               "horizon");
        }
        if (r.population != first.population) {
            throw InvalidInput("population differs: " + std::to_string(first.population) + " vs " +
                                   std::to_string(r.population),
                               "population");
        }
    }
    Comparison c;
    c.name = name;
    for (const auto& r : results) {
        c.curves.push_back(cumulative_curve(*r.result, r.name, r.clips));
        const double fin = c.curves.back().points.empty() ? 0.0 : c.curves.back().points.back().mean;
        c.ranking.push_back({r.name, fin, 0});
    }
    std::stable_sort(c.ranking.begin(), c.ranking.end(),
                     [](const RankedResult& a, const RankedResult& b) { return a.final_mean < b.final_mean; });
    for (std::size_t i = 0; i < c.ranking.size(); ++i)
        c.ranking[i].rank = (i > 0 && c.ranking[i].final_mean == c.ranking[i - 1].final_mean) ? c.ranking[i - 1].rank
                                                                                            : static_cast<int>(i) + 1;
    return c;
}

void to_json(nlohmann::json& j, const Comparison& c) {
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& r : c.ranking) ranking.push_back({{"name", r.name}, {"final_mean", r.final_mean}, {"rank", r.rank}});
    j = {{"name", c.name}, {"curves", c.curves}, {"ranking", std::move(ranking)}};
}

} // namespace epimob::analytics
