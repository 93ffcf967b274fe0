#pragma once

#include "epimob/engine/ensemble.hpp"
#include "epimob/geo/grid_system.hpp"

#include <json.hpp>

#include <array>
#include <string>
#include <vector>

namespace epimob::analytics {

using geo::CellId;

struct CurvePoint {
    std::int64_t local_day = 0;
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct CurveSeries {
    std::string name;
    std::vector<CurvePoint> points;
    std::vector<std::string> clips; // parameter and policy summaries

    friend bool operator==(const CurveSeries&, const CurveSeries&) = default;
};

// Mean cumulative infections per day with the 95% band, over kept runs.
CurveSeries cumulative_curve(const engine::EnsembleResult& er, std::string name = {},
                             std::vector<std::string> clips = {});

// Short human-readable summaries ("beta 0.302", "lockdown zone0 2012-07-04 +2d").
std::vector<std::string> config_clips(const EpidemicParams& params, const std::vector<policy::PolicySpec>& policies);

struct SeverityCluster {
    CellId cell;
    std::size_t count = 0; // events over all kept runs
    std::string color;     // green, orange or red by count tercile

    friend bool operator==(const SeverityCluster&, const SeverityCluster&) = default;
};

// Events of kept runs aggregated to `res` through parent_cell; sorted by cell.
std::vector<SeverityCluster> severity_clusters(const engine::EnsembleResult& er, const geo::GridSystem& grid,
                                               geo::Resolution res);

// GeoJSON-style payload. With per_run set, "value" is count / kept runs.
nlohmann::json severity_payload(const std::vector<SeverityCluster>& clusters, const engine::EnsembleResult& er,
                                const geo::GridSystem& grid, geo::Resolution res, bool per_run = false);

struct HourlyHistogram {
    std::array<double, 24> percent{};
    std::size_t total = 0;
    bool no_data() const { return total == 0; }
};

// Share of kept-run events per local hour among events inside `region`.
// Region cells may be coarser than the simulation cells.
HourlyHistogram hourly_histogram(const engine::EnsembleResult& er, const geo::GridSystem& grid,
                                 const std::vector<CellId>& region);

void to_json(nlohmann::json& j, const CurveSeries& c);
void from_json(const nlohmann::json& j, CurveSeries& c);
void to_json(nlohmann::json& j, const HourlyHistogram& h);

struct RankedResult {
    std::string name;
    double final_mean = 0.0;
    int rank = 0; // 1 = fewest infections; ties share a rank
};

struct Comparison {
    std::string name;
    std::vector<CurveSeries> curves;
    std::vector<RankedResult> ranking; // ascending final mean
};

struct NamedResult {
    std::string name;
    const engine::EnsembleResult* result = nullptr;
    std::vector<std::string> clips;
};

// Curves must share horizon and population; otherwise InvalidInput names the field.
Comparison compare_policies(const std::vector<NamedResult>& results, const std::string& name);

void to_json(nlohmann::json& j, const Comparison& c);

} // namespace epimob::analytics
