#include "epimob/risk/poi.hpp"

#include "epimob/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>

namespace epimob::risk {

bool DailyInterval::contains(int sod) const {
    if (open_s <= close_s) return sod >= open_s && sod < close_s;
    return sod >= open_s || sod < close_s;
}

bool is_open(const Schedule& schedule, int sod) {
    return std::any_of(schedule.begin(), schedule.end(), [&](const DailyInterval& iv) { return iv.contains(sod); });
}

DailyInterval parse_interval(std::string_view open, std::string_view close) {
    DailyInterval iv{parse_clock(open), parse_clock(close)};
    if (iv.open_s >= static_cast<int>(kSecondsPerDay)) throw InvalidInput("opening time must be before 24:00");
    if (iv.open_s == iv.close_s) throw InvalidInput("empty opening interval");
    return iv;
}

std::string normalize_category(std::string_view raw) {
    std::string out;
    bool pending = false;
    for (unsigned char ch : raw) {
        if (std::isalnum(ch)) {
            if (pending && !out.empty()) out.push_back('_');
            pending = false;
            out.push_back(static_cast<char>(std::tolower(ch)));
        } else if (ch == '&') {
            if (!out.empty()) out += "_and";
            pending = true;
        } else {
            pending = true;
        }
    }
    return out;
}

CategoryRegistry CategoryRegistry::builtin() {
    CategoryRegistry r;
    for (const char* n : {"entertainment", "restaurant", "supermarket", "station", "public_space", "forest_park",
                          "office", "school", "hospital", "hotel", "convenience_store", "residential", "other"}) {
        r.add(n);
    }
    r.add_alias("entertainment_place", "entertainment");
    r.add_alias("supermarket_and_shopping_mall", "supermarket");
    r.add_alias("shopping_mall", "supermarket");
    r.add_alias("subway_and_bus_station", "station");
    r.add_alias("subway_station", "station");
    r.add_alias("bus_station", "station");
    r.add_alias("park", "public_space");
    return r;
}

void CategoryRegistry::add(std::string_view name) {
    const auto n = normalize_category(name);
    if (n.empty()) throw InvalidInput("empty category name");
    names_.insert(n);
}

void CategoryRegistry::add_alias(std::string_view alias, std::string_view canonical) {
    aliases_[normalize_category(alias)] = normalize_category(canonical);
}

std::optional<std::string> CategoryRegistry::canonical(std::string_view raw) const {
    auto n = normalize_category(raw);
    if (auto it = aliases_.find(n); it != aliases_.end()) n = it->second;
    if (names_.count(n)) return n;
    return std::nullopt;
}

Schedule default_schedule(const std::string& category) {
    if (category == "entertainment") return {{18 * 3600, 2 * 3600}};
    if (category == "restaurant") return {{11 * 3600, 23 * 3600}};
    if (category == "supermarket") return {{10 * 3600, 21 * 3600}};
    return {{9 * 3600, 18 * 3600}};
}

void RiskConfig::validate() const {
    for (const auto& [cat, r] : risk_values) {
        if (normalize_category(cat) != cat || cat.empty())
            throw InvalidInput("category '" + cat + "' is not in normalized form", "/risk_values/" + cat);
        if (!(r >= 0.0)) throw InvalidInput("risk values must be non-negative", "/risk_values/" + cat);
    }
    if (!(k >= 0.0)) throw InvalidInput("k must be non-negative", "/k");
    for (const auto& [cat, sched] : schedules) {
        for (const auto& iv : sched) {
            if (iv.open_s < 0 || iv.open_s >= kSecondsPerDay || iv.close_s < 0 || iv.close_s > kSecondsPerDay ||
                iv.open_s == iv.close_s)
                throw InvalidInput("invalid opening interval", "/schedules/" + cat);
        }
    }
}

double RiskConfig::risk_of(const std::string& category) const {
    auto it = risk_values.find(category);
    return it == risk_values.end() ? 0.0 : it->second;
}

Schedule RiskConfig::schedule_of(const std::string& category) const {
    auto it = schedules.find(category);
    return it == schedules.end() ? default_schedule(category) : it->second;
}

CategoryRegistry RiskConfig::registry() const {
    auto r = CategoryRegistry::builtin();
    for (const auto& [cat, v] : risk_values) r.add(cat);
    for (const auto& [cat, s] : schedules) r.add(cat);
    return r;
}

void to_json(nlohmann::json& j, const RiskConfig& c) {
    nlohmann::json sched = nlohmann::json::object();
    for (const auto& [cat, s] : c.schedules) {
        auto& arr = sched[cat] = nlohmann::json::array();
        for (const auto& iv : s) arr.push_back({format_clock(iv.open_s), format_clock(iv.close_s)});
    }
    j = nlohmann::json{{"risk_values", c.risk_values},
                       {"k", c.k},
                       {"schedules", sched},
                       {"weighting", c.occupancy_weighting ? "occupancy" : "uniform"}};
}

void from_json(const nlohmann::json& j, RiskConfig& c) {
    if (!j.is_object()) throw InvalidInput("risk config must be an object");
    try {
        if (j.contains("risk_values")) {
            c.risk_values.clear();
            for (const auto& [cat, v] : j.at("risk_values").items()) {
                if (!v.is_number()) throw InvalidInput("risk value must be a number", "/risk_values/" + cat);
                c.risk_values[normalize_category(cat)] = v.get<double>();
            }
        }
        if (j.contains("k")) {
            if (!j["k"].is_number()) throw InvalidInput("k must be a number", "/k");
            c.k = j["k"].get<double>();
        }
        if (j.contains("schedules")) {
            c.schedules.clear();
            for (const auto& [cat, arr] : j.at("schedules").items()) {
                Schedule s;
                for (const auto& iv : arr) {
                    if (!iv.is_array() || iv.size() != 2)
                        throw InvalidInput("expected [\"HH:MM\", \"HH:MM\"]", "/schedules/" + cat);
                    s.push_back(parse_interval(iv[0].get<std::string>(), iv[1].get<std::string>()));
                }
                c.schedules[normalize_category(cat)] = std::move(s);
            }
        }
        if (j.contains("weighting")) {
            const auto w = j["weighting"].get<std::string>();
            if (w != "occupancy" && w != "uniform") throw InvalidInput("weighting must be occupancy or uniform", "/weighting");
            c.occupancy_weighting = w == "occupancy";
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("risk config: ") + e.what());
    }
    c.validate();
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto comma = line.find(',', pos);
        auto f = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        while (!f.empty() && (f.front() == ' ' || f.front() == '"')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '"' || f.back() == '\r')) f.remove_suffix(1);
        out.push_back(f);
        if (comma == std::string_view::npos) return out;
        pos = comma + 1;
    }
}

double to_double(std::string_view s, const char* what) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        throw InvalidInput(std::string("invalid ") + what + " '" + std::string(s) + "'");
    return v;
}

} // namespace

PoiIngestReport ingest_pois(std::istream& in, const CategoryRegistry& registry, const PoiIngestOptions& options) {
    PoiIngestReport rep;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("lat", 0) == 0) continue;
        ++rep.rows_read;
        try {
            const auto f = split(line);
            if (f.size() != 3 && f.size() != 5) throw InvalidInput("expected 3 or 5 fields");
            PoiRecord rec;
            rec.pos = LatLon{to_double(f[0], "lat"), to_double(f[1], "lon")};
            geo::validate_coordinate(rec.pos);
            auto cat = registry.canonical(f[2]);
            if (!cat) throw InvalidInput("unknown category '" + std::string(f[2]) + "'");
            rec.category = *cat;
            if (f.size() == 5 && !(f[3].empty() && f[4].empty())) rec.open_hours = Schedule{parse_interval(f[3], f[4])};
            rep.records.push_back(std::move(rec));
        } catch (const InvalidInput& e) {
            const std::string msg = "line " + std::to_string(line_no) + ": " + e.what();
            if (!options.lenient) throw InvalidInput(msg);
            ++rep.rows_skipped;
            rep.errors.push_back(msg);
        }
    }
    return rep;
}

PoiIngestReport ingest_pois(const std::filesystem::path& path, const CategoryRegistry& registry,
                            const PoiIngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open POI file " + path.string());
    return ingest_pois(in, registry, options);
}

void write_pois_csv(std::ostream& out, const std::vector<PoiRecord>& pois) {
    out << "lat,lon,category,open,close\n";
    char buf[64];
    for (const auto& p : pois) {
        std::snprintf(buf, sizeof buf, "%.7f,%.7f", p.pos.lat, p.pos.lon);
        out << buf << ',' << p.category;
        if (p.open_hours && p.open_hours->size() == 1) {
            out << ',' << format_clock(p.open_hours->front().open_s) << ',' << format_clock(p.open_hours->front().close_s);
        } else {
            out << ",,";
        }
        out << '\n';
    }
}

PoiTable::PoiTable(const std::vector<PoiRecord>& pois, const geo::GridSystem& grid, geo::Resolution res,
                   const RiskConfig& config) {
    for (const auto& p : pois) {
        auto& groups = cells_[grid.cell_of(p.pos, res)];
        Schedule sched = p.open_hours ? *p.open_hours : config.schedule_of(p.category);
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const PoiGroup& g) { return g.category == p.category && g.schedule == sched; });
        if (it == groups.end()) {
            groups.push_back(PoiGroup{p.category, std::move(sched), 1});
        } else {
            ++it->count;
        }
        ++total_;
    }
}

std::size_t PoiTable::count(CellId cell, const std::string& category) const {
    auto it = cells_.find(cell);
    if (it == cells_.end()) return 0;
    std::size_t n = 0;
    for (const auto& g : it->second)
        if (g.category == category) n += g.count;
    return n;
}

double cumulative_risk(const PoiTable& table, const RiskConfig& config, CellId cell, int sod) {
    auto it = table.cells().find(cell);
    if (it == table.cells().end()) return 0.0;
    double r = 0.0;
    for (const auto& g : it->second)
        if (is_open(g.schedule, sod)) r += static_cast<double>(g.count) * config.risk_of(g.category);
    return r;
}

} // namespace epimob::risk
