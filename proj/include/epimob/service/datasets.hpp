#pragma once

#include "epimob/geo/grid_system.hpp"
#include "epimob/mobility/synthetic.hpp"
#include "epimob/places/places.hpp"
#include "epimob/policy/policy.hpp"
#include "epimob/risk/poi.hpp"
#include "epimob/risk/synthetic_pois.hpp"
#include "epimob/service/store.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace epimob::service {

struct Dataset {
    std::string id;
    std::string kind; // "synthetic" or "upload"
    LocalClock clock;
    mobility::TrajectorySet trajectories;
    std::vector<places::HomeWork> home_work;
    std::size_t home_work_rejected = 0;
    std::vector<risk::PoiRecord> pois;
    policy::DistrictTable districts;
    std::vector<std::string> warnings;

    const Horizon& horizon() const { return trajectories.horizon(); }
    int resolution() const { return trajectories.resolution(); }
    std::size_t users() const { return trajectories.size(); }
    int days() const;

    nlohmann::json summary() const;
};

// Raw CSV upload plus the sampling frame it is mapped onto.
struct UploadRequest {
    std::string points_csv; // uid,timestamp,lat,lon
    std::string pois_csv;   // lat,lon,category[,open,close]; may be empty
    std::string start_date = "2012-07-02";
    int days = 14;
    int step = 300;
    int resolution = 8;
    int utc_offset_hours = 9;
    bool lenient = false;

    void validate() const;
};

void to_json(nlohmann::json& j, const UploadRequest& u);
void from_json(const nlohmann::json& j, UploadRequest& u);

// Builds data sets, keeps them in memory and persists their recipe (the
// synthetic spec or the uploaded CSV text) under "dataset/<id>"; a data set
// not in memory is rebuilt from its recipe on first use.
class DatasetRegistry {
public:
    DatasetRegistry(std::shared_ptr<const geo::GridSystem> grid, KvStore* store = nullptr, unsigned workers = 1);

    const geo::GridSystem& grid() const { return *grid_; }
    std::shared_ptr<const geo::GridSystem> grid_ptr() const { return grid_; }

    std::shared_ptr<const Dataset> create_synthetic(const mobility::SyntheticCitySpec& spec);
    std::shared_ptr<const Dataset> create_upload(const UploadRequest& request);

    // NotFound for unknown ids.
    std::shared_ptr<const Dataset> get(const std::string& id);
    bool contains(const std::string& id) const;
    std::vector<std::string> ids() const;

private:
    std::shared_ptr<const Dataset> build(const nlohmann::json& recipe) const;
    std::shared_ptr<const Dataset> remember(std::shared_ptr<const Dataset> ds, const nlohmann::json& recipe);

    std::shared_ptr<const geo::GridSystem> grid_;
    KvStore* store_;
    unsigned workers_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const Dataset>> loaded_;
};

// Synthetic city, its generated POIs, home/work extraction and zone
// districts, without registering anything.
std::shared_ptr<Dataset> build_synthetic_dataset(const mobility::SyntheticCitySpec& spec, const geo::GridSystem& grid,
                                                 unsigned workers = 1, const risk::SyntheticPoiSpec& pois = {});

// Content hash over trajectories, POIs and home/work pairs ("ds-" + 16 hex).
std::string dataset_content_id(const Dataset& ds);

// A hexagon-shaped district of the given radius around each synthetic zone,
// named "home-0", "work-0", "leisure-0", ...
policy::DistrictTable zone_districts(const mobility::SyntheticCity& city);

} // namespace epimob::service
