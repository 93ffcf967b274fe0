#pragma once

#include "epimob/geo/grid_system.hpp"
#include "epimob/time.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace epimob::risk {

using geo::CellId;
using geo::LatLon;

// Local daily interval [open, close) in seconds of day; close < open wraps
// past midnight. 24:00 is a valid close.
struct DailyInterval {
    int open_s = 0;
    int close_s = 0;

    bool contains(int seconds_of_day) const;
    friend bool operator==(const DailyInterval&, const DailyInterval&) = default;
    friend auto operator<=>(const DailyInterval&, const DailyInterval&) = default;
};

using Schedule = std::vector<DailyInterval>;

bool is_open(const Schedule& schedule, int seconds_of_day);
DailyInterval parse_interval(std::string_view open, std::string_view close);

// "Forest Park" -> "forest_park".
std::string normalize_category(std::string_view raw);

// Closed set of known POI categories with aliases. Risk categories added by
// the user extend it.
class CategoryRegistry {
public:
    static CategoryRegistry builtin();

    void add(std::string_view name);
    void add_alias(std::string_view alias, std::string_view canonical);

    // Canonical name, or nullopt for unknown categories.
    std::optional<std::string> canonical(std::string_view raw) const;
    const std::set<std::string>& names() const { return names_; }

private:
    std::set<std::string> names_;
    std::map<std::string, std::string> aliases_;
};

struct RiskConfig {
    std::map<std::string, double> risk_values{{"entertainment", 8.0}, {"restaurant", 2.0}, {"supermarket", 1.0}};
    double k = 0.0003;
    // Per-category open hours overriding the defaults.
    std::map<std::string, Schedule> schedules;
    // Occupancy-weighted mean for the base rate; false averages uniformly
    // over the (cell, slot) pairs of the study area.
    bool occupancy_weighting = true;

    void validate() const;
    double risk_of(const std::string& category) const;
    Schedule schedule_of(const std::string& category) const;
    CategoryRegistry registry() const;
};

// Defaults: entertainment 18:00-02:00, restaurant 11:00-23:00, supermarket
// 10:00-21:00, everything else 09:00-18:00.
Schedule default_schedule(const std::string& category);

void to_json(nlohmann::json& j, const RiskConfig& c);
void from_json(const nlohmann::json& j, RiskConfig& c);

struct PoiRecord {
    LatLon pos;
    std::string category;
    std::optional<Schedule> open_hours;
};

struct PoiIngestOptions {
    bool lenient = false;
};

struct PoiIngestReport {
    std::vector<PoiRecord> records;
    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;
    std::vector<std::string> errors;
};

// CSV `lat,lon,category[,open,close]` (header optional).
PoiIngestReport ingest_pois(std::istream& in, const CategoryRegistry& registry, const PoiIngestOptions& options = {});
PoiIngestReport ingest_pois(const std::filesystem::path& path, const CategoryRegistry& registry,
                            const PoiIngestOptions& options = {});
void write_pois_csv(std::ostream& out, const std::vector<PoiRecord>& pois);

struct PoiGroup {
    std::string category;
    Schedule schedule;
    std::size_t count = 0;
};

// POIs per cell, grouped by (category, schedule).
class PoiTable {
public:
    PoiTable() = default;
    PoiTable(const std::vector<PoiRecord>& pois, const geo::GridSystem& grid, geo::Resolution res,
             const RiskConfig& config);

    const std::map<CellId, std::vector<PoiGroup>>& cells() const { return cells_; }
    std::size_t count(CellId cell, const std::string& category) const;
    std::size_t total() const { return total_; }

private:
    std::map<CellId, std::vector<PoiGroup>> cells_;
    std::size_t total_ = 0;
};

// R = sum over categories of (open POIs) x r_i at the given local time.
double cumulative_risk(const PoiTable& table, const RiskConfig& config, CellId cell, int local_seconds_of_day);

} // namespace epimob::risk
