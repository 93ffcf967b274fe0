#include "epimob/mobility/synthetic.hpp"

#include "epimob/error.hpp"
#include "epimob/mobility/ingest.hpp"
#include "epimob/parallel.hpp"
#include "epimob/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace epimob::mobility {

namespace {

constexpr double kTravelSpeedKmh = 20.0;
constexpr UtcSeconds kTravelOverhead = 5 * 60;
constexpr UtcSeconds kStaySampling = 30 * 60;
constexpr UtcSeconds kTravelSampling = 5 * 60;
constexpr double kStayJitterKm = 0.008;
constexpr double kApproachQuietM = 600.0;

double uniform(SplitMix64& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

LatLon random_in_disk(SplitMix64& rng, const LatLon& c, double radius_km) {
    const double r = radius_km * std::sqrt(rng.uniform01());
    const double theta = 2.0 * std::numbers::pi * rng.uniform01();
    return offset_km(c, r * std::cos(theta), r * std::sin(theta));
}

UtcSeconds travel_time(const LatLon& a, const LatLon& b) {
    const double km = geo::haversine_m(a, b) / 1000.0;
    return kTravelOverhead + static_cast<UtcSeconds>(km / kTravelSpeedKmh * 3600.0);
}

std::vector<LatLon> zones_or_random(const std::vector<LatLon>& given, int n, SplitMix64& rng,
                                    const SyntheticCitySpec& spec) {
    if (!given.empty()) return given;
    std::vector<LatLon> out;
    for (int i = 0; i < n; ++i) out.push_back(random_in_disk(rng, spec.center, spec.city_radius_km));
    return out;
}

struct Visit {
    LatLon pos;
    UtcSeconds arrive;
    UtcSeconds depart;
};

// Emits raw points for one user from a sequence of visits away from home.
class PointWriter {
public:
    PointWriter(const Horizon& h, SplitMix64& rng, LatLon home) : horizon_(h), rng_(rng), home_(home) {
        stay_pos_ = jitter(home_);
        stay_start_ = h.start;
        here_ = home_;
    }

    void visit(const Visit& v) {
        const UtcSeconds leave = v.arrive - travel_time(here_, v.pos);
        if (leave <= stay_start_) return; // no room in the schedule
        close_stay(leave);
        emit_travel(here_, v.pos, leave, v.arrive);
        here_ = v.pos;
        stay_pos_ = jitter(v.pos);
        stay_start_ = v.arrive;
        go_home(v.depart);
    }

    std::vector<RawPoint> finish() {
        close_stay(horizon_.end - 1);
        return std::move(points_);
    }

    const LatLon& here() const { return here_; }

private:
    void go_home(UtcSeconds depart) {
        const UtcSeconds arrive = depart + travel_time(here_, home_);
        close_stay(depart);
        emit_travel(here_, home_, depart, arrive);
        here_ = home_;
        stay_pos_ = jitter(home_);
        stay_start_ = arrive;
    }

    LatLon jitter(const LatLon& p) { return random_in_disk(rng_, p, kStayJitterKm); }

    void close_stay(UtcSeconds end) {
        for (UtcSeconds t = stay_start_; t < end; t += kStaySampling) push(t, stay_pos_);
        push(end, stay_pos_);
    }

    // Fixes close to the destination are left out so that the next stay is
    // anchored at its own location rather than on the approach.
    void emit_travel(const LatLon& from, const LatLon& to, UtcSeconds t0, UtcSeconds t1) {
        for (UtcSeconds t = t0 + kTravelSampling; t < t1; t += kTravelSampling) {
            const double f = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
            const LatLon p{from.lat + f * (to.lat - from.lat), from.lon + f * (to.lon - from.lon)};
            if (geo::haversine_m(p, to) > kApproachQuietM) push(t, p);
        }
    }

    void push(UtcSeconds t, const LatLon& p) {
        if (!horizon_.contains(t)) return;
        if (!points_.empty() && points_.back().t >= t) return;
        points_.push_back(RawPoint{t, p});
    }

    const Horizon& horizon_;
    SplitMix64& rng_;
    LatLon home_;
    LatLon here_;
    LatLon stay_pos_;
    UtcSeconds stay_start_;
    std::vector<RawPoint> points_;
};

} // namespace

LatLon offset_km(const LatLon& origin, double north_km, double east_km) {
    const double lat = origin.lat + north_km / 110.574;
    const double lon = origin.lon + east_km / (111.320 * std::cos(origin.lat * std::numbers::pi / 180.0));
    return LatLon{lat, lon};
}

void SyntheticCitySpec::validate() const {
    if (n_users < 1) throw InvalidInput("n_users must be >= 1", "n_users");
    if (home_zones.empty() && n_home_zones < 1) throw InvalidInput("need at least one home zone", "n_home_zones");
    if (commute_share > 0 && work_zones.empty() && n_work_zones < 1)
        throw InvalidInput("need at least one work zone", "n_work_zones");
    if (weekend_leisure && leisure_zones.empty() && n_leisure_zones < 1)
        throw InvalidInput("need at least one leisure zone", "n_leisure_zones");
    if (!(commute_share >= 0.0 && commute_share <= 1.0)) throw InvalidInput("commute_share outside [0, 1]", "commute_share");
    if (!(leisure_prob >= 0.0 && leisure_prob <= 1.0)) throw InvalidInput("leisure_prob outside [0, 1]", "leisure_prob");
    if (!work_zone_weights.empty()) {
        const auto n = work_zones.empty() ? static_cast<std::size_t>(n_work_zones) : work_zones.size();
        if (work_zone_weights.size() != n) throw InvalidInput("one weight per work zone", "work_zone_weights");
        for (double w : work_zone_weights)
            if (!(w >= 0.0)) throw InvalidInput("weights must be non-negative", "work_zone_weights");
    }
    for (double r : {city_radius_km, home_zone_radius_km, work_zone_radius_km, leisure_zone_radius_km, wander_radius_km})
        if (!(r > 0.0)) throw InvalidInput("radii must be positive");
    geo::validate_coordinate(center);
    if (days < 1) throw InvalidInput("days must be >= 1", "days");
    if (step <= 0 || kSecondsPerDay % step != 0) throw InvalidInput("step must divide one day", "step");
    (void)geo::Resolution(resolution);
    (void)parse_date(start_date);
}

Horizon SyntheticCitySpec::horizon() const { return local_days_horizon(parse_date(start_date), days, step, clock()); }

void to_json(nlohmann::json& j, const SyntheticCitySpec& s) {
    auto pts = [](const std::vector<LatLon>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& p : v) a.push_back({p.lat, p.lon});
        return a;
    };
    j = nlohmann::json{{"n_users", s.n_users},
                       {"n_home_zones", s.n_home_zones},
                       {"n_work_zones", s.n_work_zones},
                       {"n_leisure_zones", s.n_leisure_zones},
                       {"center", {s.center.lat, s.center.lon}},
                       {"city_radius_km", s.city_radius_km},
                       {"home_zones", pts(s.home_zones)},
                       {"work_zones", pts(s.work_zones)},
                       {"leisure_zones", pts(s.leisure_zones)},
                       {"work_zone_weights", s.work_zone_weights},
                       {"home_zone_radius_km", s.home_zone_radius_km},
                       {"work_zone_radius_km", s.work_zone_radius_km},
                       {"leisure_zone_radius_km", s.leisure_zone_radius_km},
                       {"wander_radius_km", s.wander_radius_km},
                       {"commute_share", s.commute_share},
                       {"weekend_leisure", s.weekend_leisure},
                       {"leisure_prob", s.leisure_prob},
                       {"rng_seed", s.rng_seed},
                       {"start_date", s.start_date},
                       {"days", s.days},
                       {"step", s.step},
                       {"resolution", s.resolution},
                       {"utc_offset_hours", s.utc_offset_hours}};
}

void from_json(const nlohmann::json& j, SyntheticCitySpec& s) {
    if (!j.is_object()) throw InvalidInput("synthetic city spec must be a JSON object");
    auto pts = [&](const char* key, std::vector<LatLon>& out) {
        if (!j.contains(key)) return;
        out.clear();
        for (const auto& p : j.at(key)) {
            if (!p.is_array() || p.size() != 2) throw InvalidInput("expected [lat, lon]", std::string("/") + key);
            out.push_back(LatLon{p[0].get<double>(), p[1].get<double>()});
        }
    };
    try {
        s.n_users = j.value("n_users", s.n_users);
        s.n_home_zones = j.value("n_home_zones", s.n_home_zones);
        s.n_work_zones = j.value("n_work_zones", s.n_work_zones);
        s.n_leisure_zones = j.value("n_leisure_zones", s.n_leisure_zones);
        if (j.contains("center")) s.center = LatLon{j["center"].at(0).get<double>(), j["center"].at(1).get<double>()};
        s.city_radius_km = j.value("city_radius_km", s.city_radius_km);
        pts("home_zones", s.home_zones);
        pts("work_zones", s.work_zones);
        pts("leisure_zones", s.leisure_zones);
        s.work_zone_weights = j.value("work_zone_weights", s.work_zone_weights);
        s.home_zone_radius_km = j.value("home_zone_radius_km", s.home_zone_radius_km);
        s.work_zone_radius_km = j.value("work_zone_radius_km", s.work_zone_radius_km);
        s.leisure_zone_radius_km = j.value("leisure_zone_radius_km", s.leisure_zone_radius_km);
        s.wander_radius_km = j.value("wander_radius_km", s.wander_radius_km);
        s.commute_share = j.value("commute_share", s.commute_share);
        s.weekend_leisure = j.value("weekend_leisure", s.weekend_leisure);
        s.leisure_prob = j.value("leisure_prob", s.leisure_prob);
        s.rng_seed = j.value("rng_seed", s.rng_seed);
        s.start_date = j.value("start_date", s.start_date);
        s.days = j.value("days", s.days);
        s.step = j.value("step", s.step);
        s.resolution = j.value("resolution", s.resolution);
        s.utc_offset_hours = j.value("utc_offset_hours", s.utc_offset_hours);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("synthetic city spec: ") + e.what());
    }
    s.validate();
}

SyntheticCity generate_synthetic_city(const SyntheticCitySpec& spec, const geo::GridSystem& grid, unsigned workers) {
    spec.validate();
    SyntheticCity city;
    city.spec = spec;
    city.horizon = spec.horizon();
    city.clock = spec.clock();
    const geo::Resolution res(spec.resolution);

    SplitMix64 layout_rng(derive_seed(spec.rng_seed, {0x7a6f6e6573ULL}));
    city.home_zones = zones_or_random(spec.home_zones, spec.n_home_zones, layout_rng, spec);
    city.work_zones = zones_or_random(spec.work_zones, spec.n_work_zones, layout_rng, spec);
    city.leisure_zones = zones_or_random(spec.leisure_zones, spec.n_leisure_zones, layout_rng, spec);

    std::vector<double> cumulative;
    double total_weight = 0.0;
    for (std::size_t z = 0; z < city.work_zones.size(); ++z) {
        total_weight += spec.work_zone_weights.empty() ? 1.0 : spec.work_zone_weights[z];
        cumulative.push_back(total_weight);
    }

    // Anchors sit near cell centers so that repeated stays land in one cell.
    const double edge_km = std::sqrt(2.0 * grid.cell_area_km2(res) / (3.0 * std::sqrt(3.0)));
    auto anchor = [&](SplitMix64& rng, const LatLon& p) {
        return random_in_disk(rng, grid.cell_center(grid.cell_of(p, res)), 0.3 * edge_km);
    };

    const auto days = day_slices(city.horizon, city.clock);
    const auto n = static_cast<std::size_t>(spec.n_users);
    city.profiles.resize(n);
    city.raw.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        SplitMix64 rng(derive_seed(spec.rng_seed, {u}));
        UserProfile& prof = city.profiles[u];
        char uid[32];
        std::snprintf(uid, sizeof uid, "u%05zu", u);
        prof.uid = uid;
        prof.home_zone = static_cast<int>(rng.below(city.home_zones.size()));
        prof.home = anchor(rng, random_in_disk(rng, city.home_zones[static_cast<std::size_t>(prof.home_zone)],
                                               spec.home_zone_radius_km));
        prof.role = rng.uniform01() < spec.commute_share ? Role::commuter : Role::non_commuter;
        if (prof.role == Role::commuter) {
            const double pick = rng.uniform01() * total_weight;
            const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
            prof.work_zone = static_cast<int>(std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1));
            prof.work = anchor(rng, random_in_disk(rng, city.work_zones[static_cast<std::size_t>(prof.work_zone)],
                                                   spec.work_zone_radius_km));
        }

        PointWriter writer(city.horizon, rng, prof.home);
        for (const auto& day : days) {
            const UtcSeconds midnight = city.clock.midnight_utc(day.local_day);
            const bool weekend = LocalClock::weekday_of_day(day.local_day) >= 5;
            auto at = [&](double hours) { return midnight + static_cast<UtcSeconds>(hours * 3600.0); };
            if (prof.role == Role::commuter && !weekend) {
                const UtcSeconds arrive = at(uniform(rng, 9.0, 10.75));
                const UtcSeconds leave = at(uniform(rng, 17.0, 19.0));
                writer.visit(Visit{prof.work, arrive, leave});
            } else if (weekend && spec.weekend_leisure && rng.uniform01() < spec.leisure_prob) {
                const auto& zone = city.leisure_zones[rng.below(city.leisure_zones.size())];
                const LatLon spot = random_in_disk(rng, zone, spec.leisure_zone_radius_km);
                const UtcSeconds arrive = at(uniform(rng, 12.0, 15.0));
                writer.visit(Visit{spot, arrive, arrive + static_cast<UtcSeconds>(uniform(rng, 1.0, 3.0) * 3600.0)});
            } else if (prof.role == Role::non_commuter) {
                const int stops = 2 + static_cast<int>(rng.below(3));
                UtcSeconds t = at(uniform(rng, 9.0, 10.5));
                LatLon from = prof.home;
                for (int s = 0; s < stops; ++s) {
                    const LatLon spot = random_in_disk(rng, prof.home, spec.wander_radius_km);
                    const UtcSeconds arrive = t + travel_time(from, spot);
                    const UtcSeconds depart = arrive + static_cast<UtcSeconds>(uniform(rng, 40.0, 150.0) * 60.0);
                    if (depart > at(20.0)) break;
                    writer.visit(Visit{spot, arrive, depart});
                    // visit() returns home in between; the next stop leaves from there.
                    t = depart + travel_time(spot, prof.home) + static_cast<UtcSeconds>(uniform(rng, 10.0, 40.0) * 60.0);
                    from = prof.home;
                }
            }
        }
        city.raw[u] = RawTrajectory{prof.uid, writer.finish()};
    }

    BuildOptions build;
    build.workers = workers;
    auto report = build_trajectory_set(city.raw, city.horizon, res, grid, build);
    if (!report.rejected.empty()) {
        throw InvalidInput("synthetic user '" + report.rejected.front().first + "' rejected: " + report.rejected.front().second);
    }
    city.trajectories = std::move(report.trajectories);
    return city;
}

} // namespace epimob::mobility
