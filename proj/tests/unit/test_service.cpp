#include "epimob/analytics/analytics.hpp"
#include "epimob/error.hpp"
#include "epimob/hash.hpp"
#include "epimob/mobility/io.hpp"
#include "epimob/service/api.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>
#include <httplib.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

using namespace epimob;
using namespace epimob::service;
using nlohmann::json;

namespace {

std::string field_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const InvalidInput& e) {
        return e.field();
    }
    return "<no error>";
}

SimulationConfig parse_config(const std::string& text) { return json::parse(text).get<SimulationConfig>(); }

mobility::SyntheticCitySpec small_spec() {
    mobility::SyntheticCitySpec spec;
    spec.n_users = 150;
    spec.days = 7;
    spec.city_radius_km = 4.0;
    spec.rng_seed = 7;
    return spec;
}

std::shared_ptr<const geo::GridSystem> h3() {
    static auto g = geo::make_h3_grid();
    return g;
}

SimulationConfig small_config(const std::string& dataset_id, int m = 8) {
    SimulationConfig cfg;
    cfg.dataset_id = dataset_id;
    cfg.m = m;
    cfg.params.beta_global = 3.0;
    cfg.params.i0 = 10;
    return cfg;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

} // namespace

TEST_CASE("simulation config parsing reports absolute field paths") {
    const auto cfg = parse_config(R"({"dataset_id": "ds-1"})");
    CHECK(cfg.m == 100);
    CHECK(cfg.params == EpidemicParams{});
    CHECK(cfg.policies.empty());

    CHECK(field_of([] { parse_config(R"({"m": 5})"); }) == "/dataset_id");
    CHECK(field_of([] { parse_config(R"({"dataset_id": "d", "m": 1})"); }) == "/m");
    CHECK(field_of([] { parse_config(R"({"dataset_id": "d", "m": "many"})"); }) == "/m");
    CHECK(field_of([] { parse_config(R"({"dataset_id": "d", "params": {"sigma": "x"}})"); }) == "/params/sigma");
    CHECK(field_of([] { parse_config(R"({"dataset_id": "d", "params": {"gamma": -1}})"); }) == "/params/gamma");
    CHECK(field_of([] { parse_config(R"({"dataset_id": "d", "risk": {"k": "x"}})"); }) == "/risk/k");
    CHECK(field_of([] { parse_config(R"({"dataset_id": "d", "colour": 1})"); }) == "/colour");
    CHECK(field_of([] {
              parse_config(R"({"dataset_id": "d", "policies": [
                {"kind": "screening", "name": "s", "start": "2012-07-02", "days": 1, "cells": ["882f5aadb7fffff"]},
                {"kind": "lockdown", "name": "l", "start": "2012-07-02",
                 "polygons": [[[35.6, 139.7], [35.7, 139.7], [35.7, 139.8]]]}]})");
          }) == "/policies/1/days");
    CHECK(field_of([] {
              parse_config(R"({"dataset_id": "d", "policies": [{"kind": "lockdown", "name": "l",
                "start": "2012-07-02", "days": 2, "polygons": [[[35.6, 139.7], [35.7, 139.7]]]}]})");
          }) == "/policies/0/polygons/0");
    CHECK_THROWS_AS(parse_json_body("{not json"), InvalidInput);

    SUBCASE("JSON round trip") {
        auto c = parse_config(R"({"dataset_id": "d", "name": "n", "m": 7, "params": {"beta_global": 0.4},
            "risk": {"k": 0.001}, "districts": {"A": [[35.6, 139.7], [35.7, 139.7], [35.7, 139.8]]},
            "policies": [{"kind": "telecommuting", "name": "t", "start": "2012-07-03", "days": 2,
                          "regions": [{"district": "A", "reduction": 0.7}]}]})");
        const auto back = json(c).get<SimulationConfig>();
        CHECK(back.name == "n");
        CHECK(back.m == 7);
        CHECK(back.params == c.params);
        CHECK(back.policies == c.policies);
        CHECK(back.districts == c.districts);
        CHECK(back.fingerprint() == c.fingerprint());
    }
}

TEST_CASE("config fingerprint") {
    const auto a = parse_config(R"({"dataset_id": "d", "name": "first", "m": 10, "params": {"sigma": 0.25, "i0": 3}})");
    const auto b = parse_config(R"({"params": {"i0": 3, "sigma": 0.25}, "m": 10, "name": "second", "dataset_id": "d"})");
    CHECK(a.fingerprint().size() == 64);
    CHECK(a.fingerprint() == b.fingerprint()); // key order and display name do not matter
    CHECK(a.fingerprint() == sha256_hex(a.canonical().dump()));
    CHECK(a.canonical().count("name") == 0);

    auto c = a;
    c.m = 11;
    CHECK(c.fingerprint() != a.fingerprint());
    c = a;
    c.params.rng_seed += 1;
    CHECK(c.fingerprint() != a.fingerprint());
    c = a;
    c.risk.k *= 2;
    CHECK(c.fingerprint() != a.fingerprint());
    c = a;
    c.dataset_id = "e";
    CHECK(c.fingerprint() != a.fingerprint());
}

TEST_CASE("key-value store records") {
    testing::TempDir dir;
    KvStore store(dir.path());

    store.put("job/a", "first");
    store.put("job/b", std::string("\0binary\xff", 8));
    CHECK(store.get("job/a") == "first");
    CHECK(store.get("job/b") == std::string("\0binary\xff", 8));
    store.put("job/a", "second");
    CHECK(store.get("job/a") == "second");
    CHECK_FALSE(store.get("job/zzz").has_value());
    CHECK(store.ids("job") == std::vector<std::string>{"a", "b"});
    CHECK(store.ids("result").empty());
    CHECK_THROWS_AS(store.put("../etc/passwd", "x"), InvalidInput);
    CHECK_THROWS_AS(store.put("noslash", "x"), InvalidInput);
    CHECK_THROWS_AS(store.put("job/..", "x"), InvalidInput);
    for (const auto& e : std::filesystem::directory_iterator(dir.path() / "job"))
        CHECK(e.path().extension() == ".rec"); // no temporaries left behind
    CHECK(store.remove("job/b"));
    CHECK_FALSE(store.contains("job/b"));

    SUBCASE("record layout") {
        const std::string payload = "{\"x\":1}";
        const auto bytes = read_file(store.path_of("job/a"));
        CHECK(KvStore::encode("second") == bytes);
        const auto rec = KvStore::encode(payload);
        REQUIRE(rec.size() == 20 + payload.size());
        CHECK(rec.substr(0, 4) == "EPMB");
        auto le = [&](std::size_t at, int n) {
            std::uint64_t v = 0;
            for (int i = n - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(rec[at + i]);
            return v;
        };
        CHECK(le(4, 4) == 1);
        CHECK(le(8, 8) == payload.size());
        CHECK(le(16, 4) == crc32_of(payload));
        CHECK(rec.substr(20) == payload);
        CHECK(KvStore::decode(rec, "x") == payload);
    }

    SUBCASE("truncated record") {
        const auto path = store.path_of("job/a");
        const auto bytes = read_file(path);
        write_file(path, bytes.substr(0, bytes.size() - 3));
        try {
            (void)store.get("job/a");
            FAIL("expected an integrity error");
        } catch (const IntegrityError& e) {
            CHECK(std::string(e.what()).find("length mismatch") != std::string::npos);
        }
        write_file(path, bytes.substr(0, 10));
        CHECK_THROWS_AS((void)store.get("job/a"), IntegrityError);
        write_file(path, "");
        CHECK_THROWS_AS((void)store.get("job/a"), IntegrityError);
    }

    SUBCASE("flipped payload byte") {
        const auto path = store.path_of("job/a");
        auto bytes = read_file(path);
        bytes.back() ^= 0x01;
        write_file(path, bytes);
        try {
            (void)store.get("job/a");
            FAIL("expected an integrity error");
        } catch (const IntegrityError& e) {
            CHECK(std::string(e.what()).find("checksum mismatch") != std::string::npos);
        }
    }

    SUBCASE("bad magic") {
        const auto path = store.path_of("job/a");
        auto bytes = read_file(path);
        bytes[0] = 'X';
        write_file(path, bytes);
        CHECK_THROWS_AS((void)store.get("job/a"), IntegrityError);
    }
}

TEST_CASE("dataset registry") {
    testing::TempDir dir;
    KvStore store(dir.path());
    DatasetRegistry registry(h3(), &store, 2);
    const auto ds = registry.create_synthetic(small_spec());
    CHECK(ds->id.rfind("ds-", 0) == 0);
    CHECK(ds->kind == "synthetic");
    CHECK(ds->users() == 150);
    CHECK(ds->days() == 7);
    CHECK_FALSE(ds->home_work.empty());
    CHECK_FALSE(ds->pois.empty());
    CHECK(ds->districts.count("work-0") == 1);
    CHECK(registry.create_synthetic(small_spec())->id == ds->id);
    CHECK(registry.ids() == std::vector<std::string>{ds->id});
    CHECK_THROWS_AS(registry.get("ds-0000000000000000"), NotFound);
    CHECK_THROWS_AS(registry.get("../../etc"), NotFound);

    auto other = small_spec();
    other.rng_seed = 8;
    CHECK(registry.create_synthetic(other)->id != ds->id);

    SUBCASE("rebuilt from the store by a fresh registry") {
        DatasetRegistry again(h3(), &store, 1);
        const auto loaded = again.get(ds->id);
        CHECK(loaded->trajectories.dataset_id() == ds->trajectories.dataset_id());
        CHECK(loaded->home_work == ds->home_work);
        CHECK(loaded->pois.size() == ds->pois.size());
    }

    SUBCASE("CSV upload of the same points maps to the same trajectories") {
        const auto& city = testing::small_city(150, 7, 0.7, 7);
        std::ostringstream csv;
        mobility::write_raw_csv(csv, city.raw);
        UploadRequest up;
        up.points_csv = csv.str();
        up.days = 7;
        const auto uploaded = registry.create_upload(up);
        CHECK(uploaded->kind == "upload");
        CHECK(uploaded->users() == 150);
        CHECK(uploaded->trajectories.dataset_id() == city.trajectories.dataset_id());
        CHECK(uploaded->home_work == ds->home_work);
        CHECK(uploaded->pois.empty());
        CHECK(uploaded->id != ds->id); // no POIs, different content

        DatasetRegistry again(h3(), &store, 1);
        CHECK(again.get(uploaded->id)->trajectories.dataset_id() == city.trajectories.dataset_id());
    }

    SUBCASE("upload validation") {
        UploadRequest up;
        CHECK(field_of([&] { registry.create_upload(up); }) == "points");
        up.points_csv = "uid,timestamp,lat,lon\nu1,2012-07-02T00:00:00Z,35.6,139.7\n";
        up.step = 7;
        CHECK(field_of([&] { registry.create_upload(up); }) == "step");
        up.step = 300;
        up.start_date = "2012-13-01";
        CHECK(field_of([&] { registry.create_upload(up); }) == "start_date");
    }
}

TEST_CASE("job lifecycle, deduplication and capacity") {
    testing::TempDir dir;
    KvStore store(dir.path());
    DatasetRegistry registry(h3(), &store, 2);
    const auto ds = registry.create_synthetic(small_spec());
    JobManagerOptions opts;
    opts.workers = 3;
    opts.start = false;
    JobManager jobs(store, registry, opts);

    auto cfg = small_config(ds->id);
    cfg.name = "first";
    const auto sub = jobs.submit(cfg);
    CHECK_FALSE(sub.cached);
    CHECK(sub.record.status == JobStatus::queued);
    CHECK(sub.record.progress == 0.0);
    CHECK(jobs.get(sub.record.job_id).status == JobStatus::queued);
    CHECK_THROWS_AS(jobs.result(sub.record.job_id), NotReady);
    CHECK_THROWS_AS(jobs.get("job-nope"), NotFound);

    jobs.start();
    const auto done = jobs.wait(sub.record.job_id, std::chrono::seconds(120));
    REQUIRE(done.status == JobStatus::done);
    CHECK(done.progress == 1.0);
    CHECK(done.result == "result/" + done.job_id);
    CHECK(done.started_at >= done.created_at);
    CHECK(done.finished_at >= done.started_at);
    CHECK(done.error.empty());

    const auto result = jobs.result(done.job_id);
    CHECK(result->fingerprint == cfg.fingerprint());
    CHECK(result->runs.size() == 8);
    // The service result equals a direct single-worker execution.
    CHECK(*result == execute(cfg, *ds, registry.grid(), 1));

    SUBCASE("identical config returns the cached job") {
        auto again = cfg;
        again.name = "renamed";
        const auto dup = jobs.submit(again);
        CHECK(dup.cached);
        CHECK(dup.record.job_id == done.job_id);
        CHECK(dup.record.status == JobStatus::done);
        CHECK(store.ids("result").size() == 1);
        CHECK(jobs.list().size() == 1);
    }

    SUBCASE("a different config is a new job") {
        auto other = cfg;
        other.m = 4;
        const auto sub2 = jobs.submit(other);
        CHECK_FALSE(sub2.cached);
        CHECK(sub2.record.job_id != done.job_id);
        CHECK(jobs.wait(sub2.record.job_id, std::chrono::seconds(120)).status == JobStatus::done);
        const auto listed = jobs.list();
        REQUIRE(listed.size() == 2);
        CHECK(listed[0].job_id == sub2.record.job_id); // most recent first
        CHECK(jobs.list(1).size() == 1);
    }

    SUBCASE("rejections") {
        auto missing = cfg;
        missing.dataset_id = "ds-missing";
        CHECK_THROWS_AS(jobs.submit(missing), NotFound);

        auto bad_step = cfg;
        bad_step.params.step = 600;
        CHECK(field_of([&] { jobs.submit(bad_step); }) == "/params/step");

        auto late = cfg;
        late.policies.push_back(json::parse(R"({"kind": "lockdown", "name": "late", "start": "2012-07-07", "days": 5,
            "polygons": [[[35.6, 139.7], [35.7, 139.7], [35.7, 139.8]]]})")
                                    .get<policy::PolicySpec>());
        CHECK(field_of([&] { jobs.submit(late); }) == "/policies/0/start");

        auto district = cfg;
        district.policies.push_back(json::parse(R"({"kind": "telecommuting", "name": "t", "start": "2012-07-03",
            "days": 2, "regions": [{"district": "Nowhere", "reduction": 0.5}]})")
                                        .get<policy::PolicySpec>());
        CHECK(field_of([&] { jobs.submit(district); }) == "/policies/0/regions/0/district");

        auto huge = cfg;
        huge.m = 1'000'000;
        CHECK_THROWS_AS(jobs.submit(huge), CapacityError);
        auto at_budget = cfg;
        at_budget.m = static_cast<int>(opts.budget / (150 * 7));
        CHECK(workload(at_budget, *ds) <= opts.budget);
        at_budget.m += 1;
        CHECK_THROWS_AS(jobs.submit(at_budget), CapacityError);
    }
}

TEST_CASE("results survive a restart; damaged records are reported") {
    testing::TempDir dir;
    std::string job_id;
    engine::EnsembleResult original;
    std::string ds_id;
    {
        KvStore store(dir.path());
        DatasetRegistry registry(h3(), &store, 2);
        ds_id = registry.create_synthetic(small_spec())->id;
        JobManager jobs(store, registry, {.workers = 2});
        job_id = jobs.submit(small_config(ds_id)).record.job_id;
        REQUIRE(jobs.wait(job_id, std::chrono::seconds(120)).status == JobStatus::done);
        original = *jobs.result(job_id);
    }
    KvStore store(dir.path());
    DatasetRegistry registry(h3(), &store, 2);
    {
        JobManager jobs(store, registry, {.workers = 2});
        CHECK(jobs.get(job_id).status == JobStatus::done);
        CHECK(*jobs.result(job_id) == original);
        CHECK(jobs.config(job_id).fingerprint() == original.fingerprint);
        CHECK(jobs.submit(small_config(ds_id)).cached);
    }
    const auto path = store.path_of("result/" + job_id);
    const auto bytes = read_file(path);
    write_file(path, bytes.substr(0, bytes.size() / 2));
    JobManager jobs(store, registry, {.workers = 2});
    CHECK_THROWS_AS(jobs.result(job_id), IntegrityError);
}

TEST_CASE("crash recovery: running jobs fail, queued jobs run") {
    testing::TempDir dir;
    KvStore store(dir.path());
    DatasetRegistry registry(h3(), &store, 2);
    const auto ds = registry.create_synthetic(small_spec());
    std::string interrupted, waiting;
    {
        JobManager jobs(store, registry, {.workers = 2, .start = false});
        interrupted = jobs.submit(small_config(ds->id, 4)).record.job_id;
        waiting = jobs.submit(small_config(ds->id, 6)).record.job_id;
    }
    // Simulate a crash while the first job was running.
    auto rec = json::parse(store.get("job/" + interrupted).value());
    rec["status"] = "running";
    store.put("job/" + interrupted, rec.dump());

    JobManager jobs(store, registry, {.workers = 2});
    const auto failed = jobs.get(interrupted);
    CHECK(failed.status == JobStatus::failed);
    CHECK(failed.error.find("restart") != std::string::npos);
    CHECK_FALSE(store.contains("result/" + interrupted));
    CHECK(jobs.wait(waiting, std::chrono::seconds(120)).status == JobStatus::done);
    CHECK(json::parse(store.get("job/" + interrupted).value())["status"] == "failed");

    // A failed fingerprint is not cached: resubmitting runs it again.
    const auto retry = jobs.submit(small_config(ds->id, 4));
    CHECK_FALSE(retry.cached);
    CHECK(retry.record.job_id != interrupted);
    CHECK(jobs.wait(retry.record.job_id, std::chrono::seconds(120)).status == JobStatus::done);
}

TEST_CASE("HTTP API end to end") {
    testing::TempDir dir;
    KvStore store(dir.path());
    DatasetRegistry registry(h3(), &store, 2);
    JobManager jobs(store, registry, {.workers = 2});
    ApiServer server(registry, jobs);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(120, 0);

    auto post = [&](const std::string& path, const json& body) {
        auto res = cli.Post(path, body.dump(), "application/json");
        REQUIRE(res);
        return std::make_pair(res->status, json::parse(res->body));
    };
    auto get = [&](const std::string& path) {
        auto res = cli.Get(path);
        REQUIRE(res);
        return std::make_pair(res->status, json::parse(res->body));
    };

    CHECK(get("/v1/health").first == 200);

    auto [st_ds, ds_body] = post("/v1/datasets/synthetic", small_spec());
    REQUIRE(st_ds == 201);
    const auto ds_id = ds_body["dataset_id"].get<std::string>();
    const auto ds = registry.get(ds_id);
    CHECK(ds_body["users"] == 150);
    CHECK(get("/v1/datasets/" + ds_id).second["dataset_id"] == ds_id);
    CHECK(get("/v1/datasets/ds-nothing").first == 404);
    {
        auto res = cli.Post("/v1/datasets/synthetic", "{oops", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }

    SUBCASE("workplaces heatmap") {
        auto [st, body] = get("/v1/datasets/" + ds_id + "/workplaces?res=7");
        REQUIRE(st == 200);
        std::size_t sum = 0;
        for (const auto& c : body["cells"]) sum += c["count"].get<std::size_t>();
        CHECK(sum == ds->home_work.size());
        CHECK(body["total"] == ds->home_work.size());
        CHECK(body["cells"][0]["polygon"]["type"] == "Polygon");
        auto [st9, err] = get("/v1/datasets/" + ds_id + "/workplaces?res=9");
        CHECK(st9 == 400);
        CHECK(err["field"] == "res");
    }

    SUBCASE("POI layers") {
        auto [st, body] = get("/v1/poi/layers?categories=restaurant,station");
        REQUIRE(st == 200);
        REQUIRE(body["layers"].size() == 2);
        std::size_t restaurants = 0;
        for (const auto& p : ds->pois) restaurants += p.category == "restaurant";
        CHECK(body["layers"][0]["category"] == "restaurant");
        CHECK(body["layers"][0]["points"].size() == restaurants);
        CHECK(get("/v1/poi/layers").second["layers"].size() == 5);
        auto [st_bad, err] = get("/v1/poi/layers?categories=volcano");
        CHECK(st_bad == 400);
        CHECK(err["field"] == "categories");
    }

    SUBCASE("CSV upload") {
        const auto& city = testing::small_city(150, 7, 0.7, 7);
        std::ostringstream csv;
        mobility::write_raw_csv(csv, city.raw);
        httplib::MultipartFormDataItems items{{"points", csv.str(), "points.csv", "text/csv"},
                                              {"days", "7", "", ""},
                                              {"start_date", "2012-07-02", "", ""}};
        auto res = cli.Post("/v1/datasets", items);
        REQUIRE(res);
        CHECK(res->status == 201);
        CHECK(json::parse(res->body)["users"] == 150);
        auto plain = cli.Post("/v1/datasets", "uid,timestamp,lat,lon\n", "text/csv");
        REQUIRE(plain);
        CHECK(plain->status == 400);
    }

    SUBCASE("simulation lifecycle") {
        auto cfg = small_config(ds_id, 10);
        cfg.name = "with lockdown";
        cfg.policies.push_back(json::parse(R"({"kind": "lockdown", "name": "L", "start": "2012-07-04", "days": 2,
            "polygons": [[[35.6901234, 139.7501234], [35.6901234, 139.7798765], [35.6698765, 139.7798765]]]})")
                                   .get<policy::PolicySpec>());

        auto [st_missing, err_missing] = post("/v1/simulations", json(small_config("ds-missing")));
        CHECK(st_missing == 404);
        auto bad = json(cfg);
        bad["m"] = 1;
        auto [st_bad, err_bad] = post("/v1/simulations", bad);
        CHECK(st_bad == 400);
        CHECK(err_bad["field"] == "/m");

        auto [st_sub, sub] = post("/v1/simulations", cfg);
        REQUIRE(st_sub == 202);
        const auto job = sub["job_id"].get<std::string>();
        CHECK_FALSE(sub["cached"].get<bool>());

        std::vector<std::string> seen;
        double last_progress = 0.0;
        for (int i = 0; i < 1200; ++i) {
            auto [st, rec] = get("/v1/simulations/" + job);
            REQUIRE(st == 200);
            const auto status = rec["status"].get<std::string>();
            if (seen.empty() || seen.back() != status) seen.push_back(status);
            CHECK(rec["progress"].get<double>() >= last_progress);
            last_progress = rec["progress"].get<double>();
            if (status == "done" || status == "failed") break;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        REQUIRE(seen.back() == "done");
        const std::vector<std::string> order{"queued", "running", "done"};
        CHECK(std::includes(order.begin(), order.end(), seen.begin(), seen.end(),
                            [&](const auto& a, const auto& b) {
                                return std::find(order.begin(), order.end(), a) < std::find(order.begin(), order.end(), b);
                            }));

        const auto result = jobs.result(job);
        auto [st_curve, curve] = get("/v1/simulations/" + job + "/curve");
        REQUIRE(st_curve == 200);
        CHECK(curve["name"] == "with lockdown");
        REQUIRE(curve["points"].size() == result->days.size());
        for (std::size_t d = 0; d < result->days.size(); ++d) {
            CHECK(curve["points"][d]["mean"].get<double>() == result->days[d].mean);
            CHECK(curve["points"][d]["lo"].get<double>() == result->days[d].lo);
            CHECK(curve["points"][d]["hi"].get<double>() == result->days[d].hi);
        }

        std::size_t kept_events = 0;
        for (const auto* run : result->kept_runs()) kept_events += run->events.size();
        auto [st_sev, sev] = get("/v1/simulations/" + job + "/severity?res=7");
        REQUIRE(st_sev == 200);
        CHECK(sev["total"] == kept_events);
        CHECK(get("/v1/simulations/" + job + "/severity?res=9").first == 400);
        auto [st_pr, per_run] = get("/v1/simulations/" + job + "/severity?per_run=true");
        REQUIRE(st_pr == 200);
        if (!per_run["clusters"].empty()) {
            const auto& c = per_run["clusters"][0];
            CHECK(c["value"].get<double>() ==
                  doctest::Approx(c["count"].get<double>() / static_cast<double>(result->kept.size())));
            auto [st_h, hist] = get("/v1/simulations/" + job + "/severity/" + c["cell"].get<std::string>() + "/hourly");
            REQUIRE(st_h == 200);
            REQUIRE(hist["bins"].size() == 24);
            double sum = 0.0;
            for (const auto& b : hist["bins"]) sum += b.get<double>();
            CHECK(std::abs(sum - 100.0) < 1e-9);
            CHECK(hist["total"] == c["count"]);
        }
        CHECK(get("/v1/simulations/" + job + "/severity/zz/hourly").first == 400);

        // The drawn polygon comes back unchanged.
        auto [st_cfg, back] = get("/v1/simulations/" + job + "/config");
        REQUIRE(st_cfg == 200);
        const auto& ring_in = cfg.policies[0].polygons[0].ring();
        const auto& ring_out = back["policies"][0]["polygons"][0];
        REQUIRE(ring_out.size() == ring_in.size());
        for (std::size_t v = 0; v < ring_in.size(); ++v) {
            CHECK(std::abs(ring_out[v][0].get<double>() - ring_in[v].lat) < 1e-6);
            CHECK(std::abs(ring_out[v][1].get<double>() - ring_in[v].lon) < 1e-6);
        }

        auto [st_dup, dup] = post("/v1/simulations", cfg);
        CHECK(st_dup == 200);
        CHECK(dup["cached"].get<bool>());
        CHECK(dup["job_id"] == job);

        auto base = small_config(ds_id, 10);
        base.name = "baseline";
        const auto base_job = post("/v1/simulations", base).second["job_id"].get<std::string>();
        REQUIRE(jobs.wait(base_job, std::chrono::seconds(120)).status == JobStatus::done);
        auto [st_cmp, cmp] = post("/v1/comparisons", {{"job_ids", {job, base_job}}, {"name", "L vs none"}});
        REQUIRE(st_cmp == 200);
        CHECK(cmp["name"] == "L vs none");
        CHECK(cmp["curves"].size() == 2);
        CHECK(cmp["ranking"].size() == 2);
        auto [st_one, err_one] = post("/v1/comparisons", {{"job_ids", {job}}});
        CHECK(st_one == 400);
        CHECK(err_one["field"] == "/job_ids");
        CHECK(post("/v1/comparisons", {{"job_ids", {job, "job-unknown"}}}).first == 404);

        auto [st_list, listed] = get("/v1/simulations");
        REQUIRE(st_list == 200);
        CHECK(listed["jobs"].size() == 2);
        CHECK(listed["jobs"][0]["job_id"] == base_job);
    }

    CHECK(get("/v1/simulations/job-unknown").first == 404);
    CHECK(get("/v1/simulations/job-unknown/curve").first == 404);
    server.stop();
}

TEST_CASE("results are not served before the job is done") {
    testing::TempDir dir;
    KvStore store(dir.path());
    DatasetRegistry registry(h3(), &store, 2);
    const auto ds = registry.create_synthetic(small_spec());
    JobManager jobs(store, registry, {.workers = 1, .start = false});
    ApiServer server(registry, jobs);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Post("/v1/simulations", json(small_config(ds->id)).dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 202);
    const auto job = json::parse(res->body)["job_id"].get<std::string>();
    for (const auto* suffix : {"/curve", "/severity"}) {
        auto r = cli.Get("/v1/simulations/" + job + suffix);
        REQUIRE(r);
        CHECK(r->status == 409);
    }
    auto r = cli.Get("/v1/simulations/" + job);
    REQUIRE(r);
    CHECK(json::parse(r->body)["status"] == "queued");
    server.stop();
}
