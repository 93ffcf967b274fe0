#include "epimob/service/datasets.hpp"

#include "epimob/error.hpp"
#include "epimob/hash.hpp"
#include "epimob/mobility/ingest.hpp"
#include "epimob/mobility/io.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace epimob::service {

int Dataset::days() const { return static_cast<int>(mobility::day_slices(horizon(), clock).size()); }

nlohmann::json Dataset::summary() const {
    nlohmann::json names = nlohmann::json::array();
    for (const auto& [name, poly] : districts) names.push_back(name);
    return {{"dataset_id", id},
            {"kind", kind},
            {"users", users()},
            {"days", days()},
            {"start", format_timestamp(horizon().start)},
            {"end", format_timestamp(horizon().end)},
            {"step", horizon().step},
            {"resolution", resolution()},
            {"utc_offset_s", clock.utc_offset_s},
            {"home_work_accepted", home_work.size()},
            {"home_work_rejected", home_work_rejected},
            {"pois", pois.size()},
            {"districts", std::move(names)},
            {"warnings", warnings}};
}

void UploadRequest::validate() const {
    if (points_csv.empty()) throw InvalidInput("points CSV is empty", "points");
    try {
        (void)parse_date(start_date);
    } catch (const InvalidInput& e) {
        throw InvalidInput(e.what(), "start_date");
    }
    if (days < 1) throw InvalidInput("days must be at least 1", "days");
    if (step <= 0 || 86400 % step != 0) throw InvalidInput("step must divide one day", "step");
    if (resolution < geo::Resolution::kMin || resolution > geo::Resolution::kMax)
        throw InvalidInput("resolution out of range", "resolution");
    if (utc_offset_hours < -12 || utc_offset_hours > 14) throw InvalidInput("utc offset out of range", "utc_offset_hours");
}

void to_json(nlohmann::json& j, const UploadRequest& u) {
    j = {{"points_csv", u.points_csv}, {"pois_csv", u.pois_csv}, {"start_date", u.start_date},
         {"days", u.days},             {"step", u.step},         {"resolution", u.resolution},
         {"utc_offset_hours", u.utc_offset_hours}, {"lenient", u.lenient}};
}

void from_json(const nlohmann::json& j, UploadRequest& u) {
    u.points_csv = j.at("points_csv").get<std::string>();
    u.pois_csv = j.value("pois_csv", std::string());
    u.start_date = j.value("start_date", u.start_date);
    u.days = j.value("days", u.days);
    u.step = j.value("step", u.step);
    u.resolution = j.value("resolution", u.resolution);
    u.utc_offset_hours = j.value("utc_offset_hours", u.utc_offset_hours);
    u.lenient = j.value("lenient", u.lenient);
}

policy::DistrictTable zone_districts(const mobility::SyntheticCity& city) {
    policy::DistrictTable out;
    const auto add = [&](const std::string& prefix, const std::vector<geo::LatLon>& zones, double radius_km) {
        for (std::size_t z = 0; z < zones.size(); ++z) {
            std::vector<geo::LatLon> ring;
            for (int k = 0; k < 6; ++k) {
                const double a = std::numbers::pi / 3.0 * k;
                ring.push_back(mobility::offset_km(zones[z], radius_km * std::sin(a), radius_km * std::cos(a)));
            }
            out.emplace(prefix + "-" + std::to_string(z), geo::GeoPolygon(std::move(ring)));
        }
    };
    add("home", city.home_zones, city.spec.home_zone_radius_km);
    add("work", city.work_zones, city.spec.work_zone_radius_km);
    add("leisure", city.leisure_zones, city.spec.leisure_zone_radius_km);
    return out;
}

std::string dataset_content_id(const Dataset& ds) {
    ContentHasher h;
    h.update(ds.trajectories.dataset_id());
    std::ostringstream pois, hw;
    risk::write_pois_csv(pois, ds.pois);
    places::write_home_work_csv(hw, ds.home_work);
    h.update(pois.str());
    h.update(hw.str());
    return "ds-" + h.hex_digest().substr(0, 16);
}

namespace {

void add_home_work(Dataset& ds, const std::vector<mobility::RawTrajectory>& raws, const Horizon& horizon,
                   const geo::GridSystem& grid, geo::Resolution res, unsigned workers) {
    places::HomeWorkOptions hwo;
    hwo.clock = ds.clock;
    auto batch = places::extract_home_work_all(raws, horizon, grid, res, hwo, workers);
    ds.home_work = std::move(batch.accepted);
    ds.home_work_rejected = batch.rejected.size();
}

} // namespace

std::shared_ptr<Dataset> build_synthetic_dataset(const mobility::SyntheticCitySpec& spec, const geo::GridSystem& grid,
                                                 unsigned workers, const risk::SyntheticPoiSpec& pois) {
    spec.validate();
    auto city = mobility::generate_synthetic_city(spec, grid, workers);
    auto ds = std::make_shared<Dataset>();
    ds->kind = "synthetic";
    ds->clock = city.clock;
    ds->pois = risk::generate_synthetic_pois(city, pois);
    ds->districts = zone_districts(city);
    add_home_work(*ds, city.raw, city.horizon, grid, geo::Resolution(spec.resolution), workers);
    ds->trajectories = std::move(city.trajectories);
    ds->id = dataset_content_id(*ds);
    return ds;
}

DatasetRegistry::DatasetRegistry(std::shared_ptr<const geo::GridSystem> grid, KvStore* store, unsigned workers)
    : grid_(std::move(grid)), store_(store), workers_(std::max(1u, workers)) {
    if (!grid_) throw InvalidInput("dataset registry needs a grid");
}

std::shared_ptr<const Dataset> DatasetRegistry::build(const nlohmann::json& recipe) const {
    const auto grid_name = recipe.at("grid").get<std::string>();
    if (grid_name != grid_->name())
        throw InvalidInput("data set was built on the '" + grid_name + "' grid, this service uses '" +
                           std::string(grid_->name()) + "'");
    const auto kind = recipe.at("kind").get<std::string>();
    if (kind == "synthetic")
        return build_synthetic_dataset(recipe.at("spec").get<mobility::SyntheticCitySpec>(), *grid_, workers_);
    if (kind != "upload") throw InvalidInput("unknown data set kind '" + kind + "'");

    const auto up = recipe.at("upload").get<UploadRequest>();
    up.validate();
    auto ds = std::make_shared<Dataset>();
    ds->kind = kind;
    ds->clock = LocalClock{up.utc_offset_hours * 3600};
    const auto horizon = local_days_horizon(parse_date(up.start_date), up.days, up.step, ds->clock);
    const geo::Resolution res(up.resolution);
    std::istringstream points(up.points_csv);
    auto ingest = mobility::ingest_trajectories(points, horizon, {up.lenient});
    for (const auto& e : ingest.errors) ds->warnings.push_back("points " + e);
    auto built = mobility::build_trajectory_set(ingest.trajectories, horizon, res, *grid_,
                                                {.interpolate = {}, .drop_long_gap_users = false, .workers = workers_});
    for (const auto& [uid, reason] : built.rejected) ds->warnings.push_back("user " + uid + ": " + reason);
    if (built.trajectories.empty()) throw InvalidInput("no user has points inside the horizon", "points");
    ds->trajectories = std::move(built.trajectories);
    if (!up.pois_csv.empty()) {
        std::istringstream pois(up.pois_csv);
        auto report = risk::ingest_pois(pois, risk::CategoryRegistry::builtin(), {up.lenient});
        for (const auto& e : report.errors) ds->warnings.push_back("pois " + e);
        ds->pois = std::move(report.records);
    }
    add_home_work(*ds, ingest.trajectories, horizon, *grid_, res, workers_);
    ds->id = dataset_content_id(*ds);
    return ds;
}

std::shared_ptr<const Dataset> DatasetRegistry::remember(std::shared_ptr<const Dataset> ds, const nlohmann::json& recipe) {
    std::lock_guard lock(mutex_);
    if (store_ && !store_->contains("dataset/" + ds->id)) store_->put("dataset/" + ds->id, recipe.dump());
    auto [it, inserted] = loaded_.emplace(ds->id, ds);
    return it->second;
}

std::shared_ptr<const Dataset> DatasetRegistry::create_synthetic(const mobility::SyntheticCitySpec& spec) {
    spec.validate();
    const nlohmann::json recipe{{"kind", "synthetic"}, {"grid", std::string(grid_->name())}, {"spec", spec}};
    return remember(build(recipe), recipe);
}

std::shared_ptr<const Dataset> DatasetRegistry::create_upload(const UploadRequest& request) {
    request.validate();
    const nlohmann::json recipe{{"kind", "upload"}, {"grid", std::string(grid_->name())}, {"upload", request}};
    return remember(build(recipe), recipe);
}

std::shared_ptr<const Dataset> DatasetRegistry::get(const std::string& id) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = loaded_.find(id); it != loaded_.end()) return it->second;
    }
    std::optional<std::string> raw;
    if (store_) {
        try {
            raw = store_->get("dataset/" + id);
        } catch (const InvalidInput&) {
            raw.reset(); // not a well-formed id, so certainly not stored
        }
    }
    if (!raw) throw NotFound("unknown dataset '" + id + "'");
    const auto recipe = nlohmann::json::parse(*raw);
    auto ds = build(recipe);
    if (ds->id != id) throw IntegrityError("dataset " + id + " rebuilt with a different content id " + ds->id);
    std::lock_guard lock(mutex_);
    auto [it, inserted] = loaded_.emplace(id, std::move(ds));
    return it->second;
}

bool DatasetRegistry::contains(const std::string& id) const {
    {
        std::lock_guard lock(mutex_);
        if (loaded_.count(id)) return true;
    }
    try {
        return store_ && store_->contains("dataset/" + id);
    } catch (const InvalidInput&) {
        return false;
    }
}

std::vector<std::string> DatasetRegistry::ids() const {
    std::set<std::string> out;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, ds] : loaded_) out.insert(id);
    }
    if (store_)
        for (const auto& id : store_->ids("dataset")) out.insert(id);
    return {out.begin(), out.end()};
}

} // namespace epimob::service
