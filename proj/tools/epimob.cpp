#include "epimob/analytics/analytics.hpp"
#include "epimob/error.hpp"
#include "epimob/mobility/io.hpp"
#include "epimob/service/api.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

using namespace epimob;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitCapacity = 3;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

struct Globals {
    std::string grid = "h3";
    unsigned workers = default_worker_count();
    std::uint64_t budget = service::JobManagerOptions{}.budget;
};

int synth(const Globals& g, const std::string& spec_path, const std::string& out_dir, const std::string& data_dir) {
    const auto spec = read_json_file(spec_path).get<mobility::SyntheticCitySpec>();
    std::unique_ptr<service::KvStore> store;
    if (!data_dir.empty()) store = std::make_unique<service::KvStore>(data_dir);
    service::DatasetRegistry registry(geo::make_grid(g.grid), store.get(), g.workers);
    const auto ds = registry.create_synthetic(spec);
    if (!out_dir.empty()) {
        const std::filesystem::path out(out_dir);
        std::filesystem::create_directories(out);
        mobility::write_grid_jsonl(out / "trajectories.jsonl", ds->trajectories);
        std::ofstream hw(out / "home_work.csv");
        places::write_home_work_csv(hw, ds->home_work);
        std::ofstream pois(out / "pois.csv");
        risk::write_pois_csv(pois, ds->pois);
        write_text(out / "summary.json", ds->summary().dump(2) + "\n");
    }
    std::cout << ds->summary().dump(2) << '\n';
    return 0;
}

int run(const Globals& g, const std::string& config_path, const std::string& out_dir, const std::string& data_dir) {
    auto doc = read_json_file(config_path);
    std::unique_ptr<service::KvStore> store;
    if (!data_dir.empty()) store = std::make_unique<service::KvStore>(data_dir);
    service::DatasetRegistry registry(geo::make_grid(g.grid), store.get(), g.workers);
    // An inline "synthetic" spec stands in for a registered dataset_id.
    if (doc.is_object() && doc.contains("synthetic")) {
        const auto ds = registry.create_synthetic(doc["synthetic"].get<mobility::SyntheticCitySpec>());
        doc.erase("synthetic");
        doc["dataset_id"] = ds->id;
        std::cerr << "dataset " << ds->id << ": " << ds->users() << " users, " << ds->days() << " days\n";
    }
    const auto cfg = doc.get<service::SimulationConfig>();
    const auto ds = registry.get(cfg.dataset_id);
    const auto cost = service::workload(cfg, *ds);
    if (cost > g.budget)
        throw CapacityError("config needs " + std::to_string(cost) + " user-days x runs, above the budget of " +
                            std::to_string(g.budget));
    const auto result = service::execute(cfg, *ds, registry.grid(), g.workers, [](std::size_t done, std::size_t total) {
        if (done == total || done % 10 == 0) std::cerr << "\rruns " << done << "/" << total << std::flush;
    });
    std::cerr << '\n';

    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    const auto name = cfg.name.empty() ? std::filesystem::path(config_path).stem().string() : cfg.name;
    write_text(out / "result.json", json{{"name", name}, {"config", cfg}, {"result", result}}.dump() + "\n");
    const auto curve = analytics::cumulative_curve(result, name, analytics::config_clips(cfg.params, cfg.policies));
    write_text(out / "curve.json", json(curve).dump(2) + "\n");
    const geo::Resolution res(result.resolution);
    write_text(out / "severity.json",
               analytics::severity_payload(analytics::severity_clusters(result, registry.grid(), res), result,
                                           registry.grid(), res, false)
                       .dump() +
                   "\n");
    std::ofstream events(out / "events.jsonl");
    engine::write_events_jsonl(events, result);
    std::ofstream daily(out / "daily.csv");
    engine::write_daily_csv(daily, result);

    json summary{{"name", name},
                 {"dataset_id", cfg.dataset_id},
                 {"fingerprint", result.fingerprint},
                 {"runs", result.runs.size()},
                 {"kept", result.kept.size()},
                 {"final_mean", curve.points.empty() ? 0.0 : curve.points.back().mean},
                 {"out", out.string()}};
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int compare(const std::vector<std::string>& paths, const std::string& name, const std::string& out_path) {
    std::vector<engine::EnsembleResult> results;
    std::vector<analytics::NamedResult> named;
    results.reserve(paths.size());
    for (const auto& p : paths) {
        const auto doc = read_json_file(p);
        if (!doc.contains("result")) throw InvalidInput(p + " is not a result file written by 'epimob run'");
        results.push_back(doc["result"].get<engine::EnsembleResult>());
        const auto cfg = doc["config"].get<service::SimulationConfig>();
        named.push_back({doc.value("name", std::filesystem::path(p).stem().string()), nullptr,
                         analytics::config_clips(cfg.params, cfg.policies)});
    }
    for (std::size_t i = 0; i < named.size(); ++i) named[i].result = &results[i];
    const json payload = analytics::compare_policies(named, name);
    if (!out_path.empty()) write_text(out_path, payload.dump(2) + "\n");
    std::cout << payload.dump(2) << '\n';
    return 0;
}

service::ApiServer* g_server = nullptr;

extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}

int serve(const Globals& g, const std::string& host, int port, const std::string& data_dir) {
    service::KvStore store(data_dir);
    service::DatasetRegistry registry(geo::make_grid(g.grid), &store, g.workers);
    service::JobManagerOptions opts;
    opts.workers = g.workers;
    opts.budget = g.budget;
    service::JobManager jobs(store, registry, opts);
    service::ApiServer server(registry, jobs);
    const int bound = server.bind(host, port);
    std::cerr << "epimob serving http://" << host << ":" << bound << "/v1 (data " << data_dir << ")\n";
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mobility-driven SEIR policy simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--grid", g.grid, "Grid backend (h3 or flat)")->check(CLI::IsMember({"h3", "flat"}));
    app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--budget", g.budget, "Capacity budget in users x days x runs");

    std::string spec_path, out_dir, data_dir, config_path, name = "comparison", host = "127.0.0.1", compare_out;
    std::vector<std::string> result_paths;
    int port = 8080;

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic city data set");
    synth_cmd->add_option("--spec", spec_path, "SyntheticCitySpec JSON")->required();
    synth_cmd->add_option("--out", out_dir, "Directory for trajectories, home/work and POI files");
    synth_cmd->add_option("--data", data_dir, "Store directory to register the data set in");

    auto* run_cmd = app.add_subcommand("run", "Run one simulation config");
    run_cmd->add_option("--config", config_path, "SimulationConfig JSON")->required();
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    run_cmd->add_option("--data", data_dir, "Store directory holding registered data sets");

    auto* compare_cmd = app.add_subcommand("compare", "Compare result files written by 'run'");
    compare_cmd->add_option("results", result_paths, "result.json files")->required()->expected(2, -1);
    compare_cmd->add_option("--name", name, "Comparison name");
    compare_cmd->add_option("--out", compare_out, "Write the payload to this file");

    auto* serve_cmd = app.add_subcommand("serve", "Serve the /v1 HTTP API");
    serve_cmd->add_option("--port", port, "Port (0 picks a free one)");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--data", data_dir, "Store directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    try {
        if (*synth_cmd) return synth(g, spec_path, out_dir, data_dir);
        if (*run_cmd) return run(g, config_path, out_dir, data_dir);
        if (*compare_cmd) return compare(result_paths, name, compare_out);
        if (*serve_cmd) return serve(g, host, port, data_dir);
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input" << (e.field().empty() ? "" : " at " + e.field()) << ": " << e.what() << '\n';
        return kExitInvalid;
    } catch (const NotFound& e) {
        std::cerr << "not found: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const CapacityError& e) {
        std::cerr << "capacity: " << e.what() << '\n';
        return kExitCapacity;
    } catch (const json::exception& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
