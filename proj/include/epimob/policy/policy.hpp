#pragma once

#include "epimob/geo/cell_set.hpp"
#include "epimob/geo/grid_system.hpp"
#include "epimob/mobility/history_index.hpp"
#include "epimob/mobility/trajectory.hpp"
#include "epimob/places/places.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epimob::policy {

using geo::CellId;
using geo::GeoPolygon;

enum class PolicyKind { lockdown, telecommuting, screening };

const char* to_string(PolicyKind k);

inline constexpr double kDefaultDetectProb = 0.879;

struct TelecommuteRegion {
    std::optional<GeoPolygon> polygon;
    std::string district; // resolved through a DistrictTable when no polygon is given
    double reduction = 0.0;

    friend bool operator==(const TelecommuteRegion&, const TelecommuteRegion&) = default;
};

struct PolicySpec {
    PolicyKind kind = PolicyKind::lockdown;
    std::string name;
    std::string start; // local date, YYYY-MM-DD
    int days = 1;
    std::vector<GeoPolygon> polygons;       // lockdown
    std::vector<TelecommuteRegion> regions; // telecommuting
    std::vector<CellId> cells;              // screening
    double detect_prob = kDefaultDetectProb;
    std::uint64_t rng_seed = 1;

    // Shape checks that need no data set. Field paths are relative to the policy.
    void validate() const;

    UtcSeconds begin(const LocalClock& clock) const;
    UtcSeconds end(const LocalClock& clock) const;
    // Throws InvalidInput ("/start") unless [begin, end) lies inside the horizon.
    void check_within(const Horizon& horizon, const LocalClock& clock) const;

    friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

void to_json(nlohmann::json& j, const PolicySpec& p);
void from_json(const nlohmann::json& j, PolicySpec& p);

using DistrictTable = std::map<std::string, GeoPolygon>;

// Reads {"Toshima": [[lat, lon], ...], ...}.
DistrictTable parse_district_table(const nlohmann::json& j);

struct PolicyContext {
    const geo::GridSystem* grid = nullptr;
    LocalClock clock;
    const DistrictTable* districts = nullptr;
    unsigned workers = 1;
};

struct TransformResult {
    mobility::TrajectorySet trajectories;
    std::vector<std::string> affected; // uids, sorted
    std::size_t days_replaced = 0;
    std::vector<std::string> warnings;
};

// Workers of each region are subsampled once to exactly round(reduction * n)
// users; their working days in the range become a constant home cell. A
// working day has at least one hour in the work cell.
TransformResult apply_telecommuting(const mobility::TrajectorySet& ts, const std::vector<places::HomeWork>& hw,
                                    const PolicySpec& spec, const PolicyContext& ctx);

struct LockdownResult : TransformResult {
    std::vector<std::string> frozen;  // inside the region when the lockdown starts
    std::size_t fallback_days = 0;    // no clean historical day available
};

// Users inside the region at the start are frozen for the range; every other
// user's days that touch the region are swapped for a random historical day
// of theirs that avoids it. Without such a day the user stays at home (or at
// the cell held when the lockdown began if home is inside the region).
LockdownResult apply_lockdown(const mobility::TrajectorySet& ts, const mobility::HistoryIndex& index,
                              const PolicySpec& spec, const PolicyContext& ctx,
                              const std::vector<places::HomeWork>* hw = nullptr);

struct ScreeningWindow {
    UtcSeconds begin = 0;
    UtcSeconds end = 0;
    double detect_prob = kDefaultDetectProb;

    friend bool operator==(const ScreeningWindow&, const ScreeningWindow&) = default;
};

class ScreeningPlan {
public:
    void add(CellId cell, ScreeningWindow window);
    void merge(const ScreeningPlan& other);

    bool empty() const { return windows_.empty(); }
    std::vector<CellId> cells() const;
    const std::map<CellId, std::vector<ScreeningWindow>>& windows() const { return windows_; }

    // Highest detection probability among windows active at t (0 if none).
    double detect_prob(CellId cell, UtcSeconds t) const;

    friend bool operator==(const ScreeningPlan&, const ScreeningPlan&) = default;

private:
    std::map<CellId, std::vector<ScreeningWindow>> windows_;
};

void to_json(nlohmann::json& j, const ScreeningPlan& p);
void from_json(const nlohmann::json& j, ScreeningPlan& p);

ScreeningPlan compile_screening(const PolicySpec& spec, const Horizon& horizon, const PolicyContext& ctx);

struct RestrictedMobilityPlan {
    mobility::TrajectorySet trajectories;
    ScreeningPlan screening;
    std::vector<PolicySpec> provenance; // in application order
    std::vector<std::string> warnings;
};

// Telecommuting first, then lockdown (each lockdown indexes the trajectories
// it receives), screening merged into one plan. Policies sharing a name must
// be identical.
RestrictedMobilityPlan compose_plan(const mobility::TrajectorySet& ts, const std::vector<PolicySpec>& policies,
                                    const std::vector<places::HomeWork>& hw, const PolicyContext& ctx);

} // namespace epimob::policy
