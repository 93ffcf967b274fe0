#include "epimob/mobility/io.hpp"

#include "epimob/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>

namespace epimob::mobility {

void write_raw_csv(std::ostream& out, const std::vector<RawTrajectory>& raws) {
    out << "uid,timestamp,lat,lon\n";
    char buf[64];
    for (const auto& r : raws) {
        for (const auto& p : r.points) {
            std::snprintf(buf, sizeof buf, "%.7f,%.7f", p.pos.lat, p.pos.lon);
            out << r.uid << ',' << format_timestamp(p.t) << ',' << buf << '\n';
        }
    }
}

void write_grid_jsonl(std::ostream& out, const TrajectorySet& ts) {
    for (const auto& g : ts.trajectories()) {
        nlohmann::json cells = nlohmann::json::array();
        for (CellId c : g.cells) cells.push_back(c.to_hex());
        out << nlohmann::json{{"uid", g.uid}, {"start", format_timestamp(g.start)}, {"step", g.step}, {"cells", cells}}.dump()
            << '\n';
    }
}

void write_grid_jsonl(const std::filesystem::path& path, const TrajectorySet& ts) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_grid_jsonl(out, ts);
}

TrajectorySet read_grid_jsonl(std::istream& in, int resolution) {
    std::vector<GridTrajectory> trajs;
    std::string line;
    std::size_t line_no = 0;
    Horizon horizon;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            GridTrajectory g;
            g.uid = j.at("uid").get<std::string>();
            g.start = parse_timestamp(j.at("start").get<std::string>());
            g.step = j.at("step").get<int>();
            for (const auto& c : j.at("cells")) g.cells.push_back(CellId::from_hex(c.get<std::string>()));
            if (trajs.empty()) {
                horizon = Horizon{g.start, g.start + static_cast<UtcSeconds>(g.cells.size()) * g.step, g.step};
                horizon.validate();
            }
            trajs.push_back(std::move(g));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const InvalidInput& e) {
            throw InvalidInput("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (trajs.empty()) throw InvalidInput("no trajectories");
    return TrajectorySet(horizon, resolution, std::move(trajs));
}

TrajectorySet read_grid_jsonl(const std::filesystem::path& path, int resolution) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open " + path.string());
    return read_grid_jsonl(in, resolution);
}

} // namespace epimob::mobility
