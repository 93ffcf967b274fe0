#include "epimob/mobility/ingest.hpp"

#include "epimob/error.hpp"
#include "epimob/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>

namespace epimob::mobility {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        auto f = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        while (!f.empty() && (f.front() == ' ' || f.front() == '"')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '"' || f.back() == '\r')) f.remove_suffix(1);
        fields.push_back(f);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return fields;
}

double parse_double(std::string_view s, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw InvalidInput(std::string("invalid ") + what + " '" + std::string(s) + "'");
    }
    return v;
}

} // namespace

std::size_t normalize_points(RawTrajectory& raw) {
    std::stable_sort(raw.points.begin(), raw.points.end(),
                     [](const RawPoint& a, const RawPoint& b) { return a.t < b.t; });
    const auto before = raw.points.size();
    raw.points.erase(std::unique(raw.points.begin(), raw.points.end(),
                                 [](const RawPoint& a, const RawPoint& b) { return a.t == b.t; }),
                     raw.points.end());
    return before - raw.points.size();
}

IngestReport ingest_trajectories(std::istream& in, const Horizon& horizon, const IngestOptions& options) {
    IngestReport report;
    std::map<std::string, RawTrajectory, std::less<>> by_uid;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            const auto cols = split_csv(line);
            if (cols.size() < 4 || cols[0] != "uid" || cols[1] != "timestamp" || cols[2] != "lat" || cols[3] != "lon") {
                throw InvalidInput("line 1: expected header 'uid,timestamp,lat,lon'");
            }
            continue;
        }
        ++report.rows_read;
        try {
            const auto f = split_csv(line);
            if (f.size() != 4) throw InvalidInput("expected 4 fields, got " + std::to_string(f.size()));
            if (f[0].empty()) throw InvalidInput("empty uid");
            RawPoint p;
            p.t = parse_timestamp(f[1]);
            p.pos = LatLon{parse_double(f[2], "lat"), parse_double(f[3], "lon")};
            geo::validate_coordinate(p.pos);
            if (!horizon.contains(p.t)) {
                ++report.rows_outside_horizon;
                continue;
            }
            auto it = by_uid.find(f[0]);
            if (it == by_uid.end()) {
                it = by_uid.emplace(std::string(f[0]), RawTrajectory{std::string(f[0]), {}}).first;
            }
            it->second.points.push_back(p);
        } catch (const InvalidInput& e) {
            const std::string msg = "line " + std::to_string(line_no) + ": " + e.what();
            if (!options.lenient) throw InvalidInput(msg);
            ++report.rows_skipped;
            report.errors.push_back(msg);
        }
    }
    for (auto& [uid, raw] : by_uid) {
        report.rows_duplicate += normalize_points(raw);
        report.trajectories.push_back(std::move(raw));
    }
    return report;
}

IngestReport ingest_trajectories(const std::filesystem::path& path, const Horizon& horizon,
                                 const IngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open trajectory file " + path.string());
    return ingest_trajectories(in, horizon, options);
}

GridTrajectory interpolate_and_map(const RawTrajectory& raw, const Horizon& horizon, geo::Resolution res,
                                   const geo::GridSystem& grid, const InterpolateOptions& options) {
    std::vector<RawPoint> pts;
    pts.reserve(raw.points.size());
    for (const auto& p : raw.points)
        if (horizon.contains(p.t)) pts.push_back(p);
    if (pts.empty()) throw InvalidInput("no observations inside the horizon for '" + raw.uid + "'");

    GridTrajectory out;
    out.uid = raw.uid;
    out.start = horizon.start;
    out.step = horizon.step;
    const auto ticks = horizon.ticks();
    out.cells.reserve(static_cast<std::size_t>(ticks));
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].t - pts[i - 1].t > options.long_gap_s) out.long_gap = true;
    }

    std::size_t next = 0; // first point with t > tick time
    LatLon cached_pos{1e9, 1e9};
    CellId cached_cell;
    for (std::int64_t k = 0; k < ticks; ++k) {
        const UtcSeconds t = horizon.tick_time(k);
        while (next < pts.size() && pts[next].t <= t) ++next;
        LatLon pos;
        if (next == 0) {
            pos = pts.front().pos;
        } else if (next == pts.size()) {
            pos = pts.back().pos;
        } else {
            const auto& a = pts[next - 1];
            const auto& b = pts[next];
            const double f = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
            pos = LatLon{a.pos.lat + f * (b.pos.lat - a.pos.lat), a.pos.lon + f * (b.pos.lon - a.pos.lon)};
        }
        if (!(pos == cached_pos)) {
            cached_pos = pos;
            cached_cell = grid.cell_of(pos, res);
        }
        out.cells.push_back(cached_cell);
    }
    return out;
}

BuildReport build_trajectory_set(const std::vector<RawTrajectory>& raws, const Horizon& horizon,
                                 geo::Resolution res, const geo::GridSystem& grid, const BuildOptions& options) {
    horizon.validate();
    std::vector<std::optional<GridTrajectory>> mapped(raws.size());
    std::vector<std::string> reasons(raws.size());
    parallel_for(raws.size(), options.workers, [&](std::size_t i) {
        try {
            auto g = interpolate_and_map(raws[i], horizon, res, grid, options.interpolate);
            if (g.long_gap && options.drop_long_gap_users) {
                reasons[i] = "gap longer than limit";
            } else {
                mapped[i] = std::move(g);
            }
        } catch (const InvalidInput& e) {
            reasons[i] = e.what();
        }
    });
    BuildReport report;
    std::vector<GridTrajectory> kept;
    kept.reserve(raws.size());
    for (std::size_t i = 0; i < raws.size(); ++i) {
        if (mapped[i]) {
            kept.push_back(std::move(*mapped[i]));
        } else {
            report.rejected.emplace_back(raws[i].uid, reasons[i]);
        }
    }
    report.trajectories = TrajectorySet(horizon, res.level(), std::move(kept));
    return report;
}

} // namespace epimob::mobility
