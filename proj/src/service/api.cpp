#include "epimob/service/api.hpp"

#include "epimob/analytics/analytics.hpp"
#include "epimob/error.hpp"

#include <httplib.h>

#include <sstream>
#include <thread>

namespace epimob::service {

namespace {

using nlohmann::json;
using geo::CellId;

const std::vector<std::string> kDefaultLayers{"entertainment", "restaurant", "station", "public_space", "supermarket"};

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message, const std::string& field = {}) {
    reply(res, status, {{"error", message}, {"field", field.empty() ? json() : json(field)}});
}

// Runs a handler and maps exceptions to status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const InvalidInput& e) {
        reply_error(res, 400, e.what(), e.field());
    } catch (const NotFound& e) {
        reply_error(res, 404, e.what());
    } catch (const NotReady& e) {
        reply_error(res, 409, e.what());
    } catch (const CapacityError& e) {
        reply_error(res, 413, e.what());
    } catch (const json::exception& e) {
        reply_error(res, 400, e.what());
    } catch (const IntegrityError& e) {
        reply_error(res, 500, e.what());
    } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
    }
}

int int_param(const httplib::Request& req, const std::string& key, int fallback) {
    if (!req.has_param(key)) return fallback;
    const auto text = req.get_param_value(key);
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw InvalidInput(key + " must be an integer", key);
    }
}

bool bool_param(const httplib::Request& req, const std::string& key) {
    if (!req.has_param(key)) return false;
    const auto v = req.get_param_value(key);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw InvalidInput(key + " must be true or false", key);
}

geo::Resolution resolution_param(const httplib::Request& req, int fallback) {
    const int level = int_param(req, "res", fallback);
    if (level < geo::Resolution::kMin || level > geo::Resolution::kMax) throw InvalidInput("res out of range", "res");
    return geo::Resolution(level);
}

json polygon_of(const geo::GridSystem& grid, CellId c) {
    json ring = json::array();
    for (const auto& [lon, lat] : geo::geojson_ring(grid, c)) ring.push_back({lon, lat});
    return {{"type", "Polygon"}, {"coordinates", json::array({ring})}};
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string form_value(const httplib::Request& req, const std::string& key) {
    if (req.has_file(key)) return req.get_file_value(key).content;
    if (req.has_param(key)) return req.get_param_value(key);
    return {};
}

int form_int(const httplib::Request& req, const std::string& key, int fallback) {
    const auto v = form_value(req, key);
    if (v.empty()) return fallback;
    try {
        return std::stoi(v);
    } catch (const std::exception&) {
        throw InvalidInput(key + " must be an integer", key);
    }
}

} // namespace

struct ApiServer::Impl {
    DatasetRegistry& datasets;
    JobManager& jobs;
    httplib::Server server;
    std::thread thread;

    Impl(DatasetRegistry& d, JobManager& j) : datasets(d), jobs(j) { routes(); }

    const geo::GridSystem& grid() const { return datasets.grid(); }

    void routes() {
        server.set_payload_max_length(512ull << 20);

        server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, {{"status", "ok"}});
        });

        server.Post("/v1/datasets/synthetic", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto spec = parse_json_body(req.body).get<mobility::SyntheticCitySpec>();
                reply(res, 201, datasets.create_synthetic(spec)->summary());
            });
        });

        server.Post("/v1/datasets", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                if (!req.is_multipart_form_data())
                    throw InvalidInput("expected multipart/form-data with a 'points' CSV part", "points");
                UploadRequest up;
                up.points_csv = form_value(req, "points");
                up.pois_csv = form_value(req, "pois");
                if (auto v = form_value(req, "start_date"); !v.empty()) up.start_date = v;
                up.days = form_int(req, "days", up.days);
                up.step = form_int(req, "step", up.step);
                up.resolution = form_int(req, "resolution", up.resolution);
                up.utc_offset_hours = form_int(req, "utc_offset_hours", up.utc_offset_hours);
                up.lenient = form_value(req, "lenient") == "true";
                reply(res, 201, datasets.create_upload(up)->summary());
            });
        });

        server.Get("/v1/datasets", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, {{"datasets", datasets.ids()}}); });
        });

        server.Get("/v1/datasets/:id", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, datasets.get(req.path_params.at("id"))->summary()); });
        });

        server.Get("/v1/datasets/:id/workplaces", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto ds = datasets.get(req.path_params.at("id"));
                const auto r = resolution_param(req, ds->resolution());
                if (r.level() > ds->resolution())
                    throw InvalidInput("res is finer than the data set's " + std::to_string(ds->resolution()), "res");
                json cells = json::array();
                std::size_t total = 0;
                for (const auto& [cell, n] : places::workplace_heatmap(ds->home_work, grid(), r)) {
                    total += n;
                    cells.push_back({{"cell", cell.to_hex()}, {"count", n}, {"polygon", polygon_of(grid(), cell)}});
                }
                reply(res, 200, {{"dataset_id", ds->id}, {"resolution", r.level()}, {"total", total}, {"cells", cells}});
            });
        });

        server.Get("/v1/poi/layers", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, poi_layers(req)); });
        });

        server.Post("/v1/simulations", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto cfg = parse_json_body(req.body).get<SimulationConfig>();
                const auto sub = jobs.submit(cfg);
                reply(res, sub.cached ? 200 : 202,
                      {{"job_id", sub.record.job_id}, {"status", to_string(sub.record.status)}, {"cached", sub.cached}});
            });
        });

        server.Get("/v1/simulations", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const int limit = int_param(req, "limit", 50);
                if (limit < 1) throw InvalidInput("limit must be positive", "limit");
                reply(res, 200, {{"jobs", jobs.list(static_cast<std::size_t>(limit))}});
            });
        });

        server.Get("/v1/simulations/:job", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, jobs.get(req.path_params.at("job"))); });
        });

        server.Get("/v1/simulations/:job/config", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, jobs.config(req.path_params.at("job"))); });
        });

        server.Get("/v1/simulations/:job/curve", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto& id = req.path_params.at("job");
                const auto result = jobs.result(id);
                const auto cfg = jobs.config(id);
                reply(res, 200,
                      analytics::cumulative_curve(*result, display_name(id),
                                                  analytics::config_clips(cfg.params, cfg.policies)));
            });
        });

        server.Get("/v1/simulations/:job/severity", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto result = jobs.result(req.path_params.at("job"));
                const auto r = resolution_param(req, result->resolution);
                const auto clusters = analytics::severity_clusters(*result, grid(), r);
                reply(res, 200, analytics::severity_payload(clusters, *result, grid(), r, bool_param(req, "per_run")));
            });
        });

        server.Get("/v1/simulations/:job/severity/:cell/hourly",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           const auto result = jobs.result(req.path_params.at("job"));
                           CellId cell;
                           try {
                               cell = CellId::from_hex(req.path_params.at("cell"));
                           } catch (const std::exception& e) {
                               throw InvalidInput(e.what(), "cell");
                           }
                           if (!grid().is_valid(cell)) throw InvalidInput("not a valid cell", "cell");
                           json body = analytics::hourly_histogram(*result, grid(), {cell});
                           body["cell"] = cell.to_hex();
                           reply(res, 200, body);
                       });
                   });

        server.Post("/v1/comparisons", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, compare(parse_json_body(req.body))); });
        });
    }

    std::string display_name(const std::string& job_id) const {
        const auto r = jobs.get(job_id);
        return r.name.empty() ? job_id : r.name;
    }

    json poi_layers(const httplib::Request& req) {
        std::shared_ptr<const Dataset> ds;
        if (req.has_param("dataset")) {
            ds = datasets.get(req.get_param_value("dataset"));
        } else {
            const auto ids = datasets.ids();
            if (ids.size() != 1) throw InvalidInput("several data sets are registered; pass ?dataset=<id>", "dataset");
            ds = datasets.get(ids.front());
        }
        const auto registry = risk::CategoryRegistry::builtin();
        std::vector<std::string> wanted;
        for (const auto& raw : req.has_param("categories") ? split_commas(req.get_param_value("categories")) : kDefaultLayers) {
            const auto canonical = registry.canonical(raw);
            if (!canonical) throw InvalidInput("unknown category '" + raw + "'", "categories");
            wanted.push_back(*canonical);
        }
        json layers = json::array();
        for (const auto& cat : wanted) {
            json points = json::array();
            for (const auto& p : ds->pois)
                if (p.category == cat) points.push_back({p.pos.lat, p.pos.lon});
            layers.push_back({{"category", cat}, {"count", points.size()}, {"points", std::move(points)}});
        }
        return {{"dataset_id", ds->id}, {"layers", std::move(layers)}};
    }

    json compare(const json& body) {
        if (!body.is_object()) throw InvalidInput("comparison request must be an object", "");
        if (!body.contains("job_ids") || !body["job_ids"].is_array()) throw InvalidInput("job_ids must be a list", "/job_ids");
        std::string name = "comparison";
        if (body.contains("name")) {
            if (!body["name"].is_string()) throw InvalidInput("name must be a string", "/name");
            name = body["name"].get<std::string>();
        }
        std::vector<std::shared_ptr<const engine::EnsembleResult>> held;
        std::vector<analytics::NamedResult> named;
        for (std::size_t i = 0; i < body["job_ids"].size(); ++i) {
            const auto& v = body["job_ids"][i];
            if (!v.is_string()) throw InvalidInput("job id must be a string", "/job_ids/" + std::to_string(i));
            const auto id = v.get<std::string>();
            held.push_back(jobs.result(id));
            const auto cfg = jobs.config(id);
            named.push_back({display_name(id), held.back().get(), analytics::config_clips(cfg.params, cfg.policies)});
        }
        try {
            json out = analytics::compare_policies(named, name);
            out["job_ids"] = body["job_ids"];
            return out;
        } catch (const InvalidInput& e) {
            throw InvalidInput(e.what(), "/" + e.field());
        }
    }
};

ApiServer::ApiServer(DatasetRegistry& datasets, JobManager& jobs) : impl_(std::make_unique<Impl>(datasets, jobs)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw std::runtime_error("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

int ApiServer::start(const std::string& host, int port) {
    const int p = bind(host, port);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return p;
}

void ApiServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace epimob::service
