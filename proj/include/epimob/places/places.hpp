#pragma once

#include "epimob/geo/grid_system.hpp"
#include "epimob/mobility/trajectory.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epimob::places {

using geo::CellId;
using geo::LatLon;

struct StayPoint {
    std::string uid;
    CellId cell;
    UtcSeconds arrive = 0;
    UtcSeconds depart = 0;
    LatLon anchor;

    UtcSeconds duration() const { return depart - arrive; }
};

struct StayOptions {
    UtcSeconds min_duration = 3600;
    double radius_m = 500.0;
};

// Greedy anchor scan: a stay opens at point i and extends while the following
// points stay within radius of point i. Spans shorter than min_duration are
// abandoned and the scan resumes at i + 1. The cell comes from the anchor.
std::vector<StayPoint> extract_stay_points(const mobility::RawTrajectory& raw, const geo::GridSystem& grid,
                                           geo::Resolution res, const StayOptions& options = {});

struct HomeWork {
    std::string uid;
    CellId home_cell;
    CellId work_cell;
    double home_rate = 0.0;
    double work_rate = 0.0;

    friend bool operator==(const HomeWork&, const HomeWork&) = default;
};

enum class HomeWorkRejection { none, no_stay_points, low_home_rate, low_work_rate, same_cell };

const char* to_string(HomeWorkRejection r);

struct HomeWorkOptions {
    double threshold = 0.75;
    StayOptions stay;
    int work_begin_s = 11 * 3600;
    int work_end_s = 17 * 3600;
    int home_begin_s = 0;
    int home_end_s = 6 * 3600;
    // The working-hours denominator counts Monday-Friday only. With every day
    // counted a five-day commuter cannot exceed 5/7 of the window.
    bool work_weekdays_only = true;
    bool allow_same_cell = false;
    LocalClock clock;
};

struct HomeWorkResult {
    HomeWorkRejection rejection = HomeWorkRejection::none;
    // Candidates and rates are filled whenever any stay exists.
    HomeWork candidate;

    bool accepted() const { return rejection == HomeWorkRejection::none; }
};

// Stay time per cell is accumulated inside the local after-hours and working
// windows, clipped to the horizon; the rate divides the top cell's time by the
// total window length. Ties go to the smallest CellId.
HomeWorkResult extract_home_work(const mobility::RawTrajectory& raw, const Horizon& horizon,
                                 const geo::GridSystem& grid, geo::Resolution res,
                                 const HomeWorkOptions& options = {});

struct HomeWorkBatch {
    std::vector<HomeWork> accepted; // sorted by uid
    std::map<std::string, HomeWorkRejection> rejected;
};

HomeWorkBatch extract_home_work_all(const std::vector<mobility::RawTrajectory>& raws, const Horizon& horizon,
                                    const geo::GridSystem& grid, geo::Resolution res,
                                    const HomeWorkOptions& options = {}, unsigned workers = 1);

// Worker count per work cell aggregated to `res` (no coarser than the cells).
std::map<CellId, std::size_t> workplace_heatmap(const std::vector<HomeWork>& hw, const geo::GridSystem& grid,
                                                geo::Resolution res);

// CSV `uid,home_cell,work_cell,home_rate,work_rate`.
void write_home_work_csv(std::ostream& out, const std::vector<HomeWork>& hw);

} // namespace epimob::places
