#include "epimob/service/jobs.hpp"

#include "epimob/error.hpp"
#include "epimob/risk/risk_field.hpp"

#include <algorithm>
#include <iostream>
#include <set>

namespace epimob::service {

namespace {

std::int64_t wall_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

int rank(JobStatus s) {
    switch (s) {
    case JobStatus::queued: return 0;
    case JobStatus::running: return 1;
    case JobStatus::done:
    case JobStatus::failed: return 2;
    }
    return 0;
}

bool finished(JobStatus s) { return s == JobStatus::done || s == JobStatus::failed; }

constexpr std::size_t kResultCacheSize = 8;

} // namespace

const char* to_string(JobStatus s) {
    switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
    }
    return "?";
}

JobStatus job_status_from(const std::string& s) {
    if (s == "queued") return JobStatus::queued;
    if (s == "running") return JobStatus::running;
    if (s == "done") return JobStatus::done;
    if (s == "failed") return JobStatus::failed;
    throw InvalidInput("unknown job status '" + s + "'", "/status");
}

void to_json(nlohmann::json& j, const JobRecord& r) {
    j = {{"job_id", r.job_id},         {"fingerprint", r.fingerprint}, {"name", r.name},
         {"dataset_id", r.dataset_id}, {"status", to_string(r.status)}, {"progress", r.progress},
         {"result", r.result.empty() ? nlohmann::json() : nlohmann::json(r.result)},
         {"error", r.error.empty() ? nlohmann::json() : nlohmann::json(r.error)},
         {"created_at", r.created_at}, {"started_at", r.started_at}, {"finished_at", r.finished_at},
         {"sequence", r.sequence}};
}

void from_json(const nlohmann::json& j, JobRecord& r) {
    r.job_id = j.at("job_id").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.status = job_status_from(j.at("status").get<std::string>());
    r.progress = j.at("progress").get<double>();
    r.result = j.at("result").is_null() ? std::string() : j.at("result").get<std::string>();
    r.error = j.at("error").is_null() ? std::string() : j.at("error").get<std::string>();
    r.created_at = j.at("created_at").get<std::int64_t>();
    r.started_at = j.at("started_at").get<std::int64_t>();
    r.finished_at = j.at("finished_at").get<std::int64_t>();
    r.sequence = j.at("sequence").get<std::uint64_t>();
}

std::uint64_t workload(const SimulationConfig& cfg, const Dataset& ds) {
    return static_cast<std::uint64_t>(ds.users()) * static_cast<std::uint64_t>(ds.days()) *
           static_cast<std::uint64_t>(std::max(cfg.m, 0));
}

void validate_against(const SimulationConfig& cfg, const Dataset& ds, const geo::GridSystem& grid) {
    cfg.validate();
    if (cfg.params.step != ds.horizon().step)
        throw InvalidInput("params.step is " + std::to_string(cfg.params.step) + " but the data set is sampled every " +
                               std::to_string(ds.horizon().step) + " s",
                           "/params/step");
    std::map<std::string, const policy::PolicySpec*> names;
    for (std::size_t i = 0; i < cfg.policies.size(); ++i) {
        const auto& p = cfg.policies[i];
        const auto base = "/policies/" + std::to_string(i);
        try {
            p.check_within(ds.horizon(), ds.clock);
        } catch (const InvalidInput& e) {
            throw InvalidInput(e.what(), base + e.field());
        }
        if (auto [it, inserted] = names.emplace(p.name, &p); !inserted && !(*it->second == p))
            throw InvalidInput("another policy is already named '" + p.name + "'", base + "/name");
        for (std::size_t k = 0; k < p.cells.size(); ++k) {
            const auto c = p.cells[k];
            if (!grid.is_valid(c) || grid.resolution_of(c).level() != ds.resolution())
                throw InvalidInput("cell " + c.to_hex() + " is not a resolution " + std::to_string(ds.resolution()) +
                                       " cell",
                                   base + "/cells/" + std::to_string(k));
        }
        for (std::size_t k = 0; k < p.regions.size(); ++k) {
            const auto& r = p.regions[k];
            if (r.polygon || r.district.empty()) continue;
            if (!cfg.districts.count(r.district) && !ds.districts.count(r.district))
                throw InvalidInput("unknown district '" + r.district + "'",
                                   base + "/regions/" + std::to_string(k) + "/district");
        }
    }
}

engine::EnsembleResult execute(const SimulationConfig& cfg, const Dataset& ds, const geo::GridSystem& grid,
                               unsigned workers, std::function<void(std::size_t, std::size_t)> progress) {
    validate_against(cfg, ds, grid);
    auto districts = ds.districts;
    for (const auto& [name, poly] : cfg.districts) districts.insert_or_assign(name, poly);
    policy::PolicyContext ctx{&grid, ds.clock, &districts, workers};
    auto plan = policy::compose_plan(ds.trajectories, cfg.policies, ds.home_work, ctx);

    // The base rate is calibrated on the unrestricted population.
    const risk::PoiTable table(ds.pois, grid, geo::Resolution(ds.resolution()), cfg.risk);
    const auto field = risk::build_risk_field(table, cfg.risk, cfg.params.beta_global, ds.trajectories,
                                              risk::SlotClock{ds.clock});
    const auto mob = engine::Mobility::compile(plan.trajectories, ds.clock);
    engine::EnsembleOptions eo;
    eo.workers = workers;
    eo.progress = std::move(progress);
    auto result = engine::run_ensemble(mob, field.field, cfg.params, plan.screening, cfg.m, eo);
    result.fingerprint = cfg.fingerprint();
    return result;
}

JobManager::JobManager(KvStore& store, DatasetRegistry& datasets, JobManagerOptions options)
    : store_(store), datasets_(datasets), options_(options) {
    options_.workers = std::max(1u, options_.workers);
    recover();
    if (options_.start) start();
}

JobManager::~JobManager() { stop(); }

void JobManager::persist(const JobRecord& r) { store_.put("job/" + r.job_id, nlohmann::json(r).dump()); }

void JobManager::recover() {
    std::vector<JobRecord> queued;
    for (const auto& id : store_.ids("job")) {
        JobRecord r;
        SimulationConfig cfg;
        try {
            r = nlohmann::json::parse(store_.get("job/" + id).value()).get<JobRecord>();
            cfg = nlohmann::json::parse(store_.get("config/" + id).value()).get<SimulationConfig>();
        } catch (const std::exception& e) {
            std::cerr << "skipping unreadable job " << id << ": " << e.what() << '\n';
            continue;
        }
        if (r.status == JobStatus::running) {
            // At most once: an interrupted run is not restarted.
            r.status = JobStatus::failed;
            r.error = "interrupted by a service restart";
            r.finished_at = wall_now();
            persist(r);
        } else if (r.status == JobStatus::done && !store_.contains(r.result)) {
            r.status = JobStatus::failed;
            r.error = "result record missing";
            persist(r);
        }
        if (r.status == JobStatus::queued) queued.push_back(r);
        if (r.status != JobStatus::failed) by_fingerprint_[r.fingerprint] = r.job_id;
        next_sequence_ = std::max(next_sequence_, r.sequence + 1);
        configs_.emplace(id, std::move(cfg));
        jobs_.emplace(id, std::move(r));
    }
    std::sort(queued.begin(), queued.end(), [](const auto& a, const auto& b) { return a.sequence < b.sequence; });
    for (const auto& r : queued) queue_.push_back(r.job_id);
}

void JobManager::start() {
    std::lock_guard lock(mutex_);
    if (worker_.joinable()) return;
    stopping_ = false;
    worker_ = std::thread([this] { worker_loop(); });
}

void JobManager::stop() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    changed_.notify_all();
    if (worker_.joinable()) worker_.join();
}

JobManager::Submission JobManager::submit(const SimulationConfig& cfg) {
    cfg.validate();
    const auto ds = datasets_.get(cfg.dataset_id);
    validate_against(cfg, *ds, datasets_.grid());
    const auto fp = cfg.fingerprint();

    std::unique_lock lock(mutex_);
    if (auto it = by_fingerprint_.find(fp); it != by_fingerprint_.end()) return {jobs_.at(it->second), true};
    const auto cost = workload(cfg, *ds);
    if (cost > options_.budget)
        throw CapacityError("config needs " + std::to_string(ds->users()) + " users x " + std::to_string(ds->days()) +
                            " days x " + std::to_string(cfg.m) + " runs = " + std::to_string(cost) +
                            ", above the budget of " + std::to_string(options_.budget));
    std::size_t attempt = 0;
    for (const auto& [id, r] : jobs_) attempt += r.fingerprint == fp;
    JobRecord r;
    r.job_id = "job-" + fp.substr(0, 12) + "-" + std::to_string(attempt);
    r.fingerprint = fp;
    r.name = cfg.name;
    r.dataset_id = cfg.dataset_id;
    r.created_at = wall_now();
    r.sequence = next_sequence_++;
    store_.put("config/" + r.job_id, nlohmann::json(cfg).dump());
    persist(r);
    jobs_.emplace(r.job_id, r);
    configs_.emplace(r.job_id, cfg);
    by_fingerprint_[fp] = r.job_id;
    queue_.push_back(r.job_id);
    lock.unlock();
    changed_.notify_all();
    return {r, false};
}

JobRecord JobManager::get(const std::string& job_id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw NotFound("unknown job '" + job_id + "'");
    return it->second;
}

std::vector<JobRecord> JobManager::list(std::size_t limit) const {
    std::lock_guard lock(mutex_);
    std::vector<JobRecord> out;
    for (const auto& [id, r] : jobs_) out.push_back(r);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sequence > b.sequence; });
    if (out.size() > limit) out.resize(limit);
    return out;
}

SimulationConfig JobManager::config(const std::string& job_id) const {
    std::lock_guard lock(mutex_);
    auto it = configs_.find(job_id);
    if (it == configs_.end()) throw NotFound("unknown job '" + job_id + "'");
    return it->second;
}

std::shared_ptr<const engine::EnsembleResult> JobManager::result(const std::string& job_id) const {
    const auto r = get(job_id);
    if (r.status == JobStatus::failed) throw NotReady("job " + job_id + " failed: " + r.error);
    if (r.status != JobStatus::done) throw NotReady("job " + job_id + " is " + to_string(r.status));
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(job_id); it != cache_.end()) return it->second;
    }
    const auto raw = store_.get(r.result);
    if (!raw) throw IntegrityError("result record " + r.result + " is missing");
    auto loaded = std::make_shared<const engine::EnsembleResult>(nlohmann::json::parse(*raw).get<engine::EnsembleResult>());
    if (loaded->fingerprint != r.fingerprint) throw IntegrityError("result " + r.result + " belongs to another config");
    std::lock_guard lock(cache_mutex_);
    if (cache_.emplace(job_id, loaded).second) {
        cache_order_.push_back(job_id);
        if (cache_order_.size() > kResultCacheSize) {
            cache_.erase(cache_order_.front());
            cache_order_.pop_front();
        }
    }
    return loaded;
}

JobRecord JobManager::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw NotFound("unknown job '" + job_id + "'");
    changed_.wait_for(lock, timeout, [&] { return finished(jobs_.at(job_id).status); });
    return jobs_.at(job_id);
}

void JobManager::update(const std::string& job_id, const std::function<void(JobRecord&)>& fn) {
    {
        std::lock_guard lock(mutex_);
        auto& r = jobs_.at(job_id);
        JobRecord next = r;
        fn(next);
        if (rank(next.status) < rank(r.status) || (finished(r.status) && next.status != r.status))
            throw std::logic_error("job " + job_id + " cannot go from " + to_string(r.status) + " to " +
                                   to_string(next.status));
        next.progress = std::max(next.progress, r.progress);
        if (next.status != r.status) persist(next);
        if (next.status == JobStatus::failed) by_fingerprint_.erase(next.fingerprint);
        r = std::move(next);
    }
    changed_.notify_all();
}

void JobManager::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(mutex_);
            changed_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
        }
        run_job(id);
    }
}

void JobManager::run_job(const std::string& job_id) {
    update(job_id, [](JobRecord& r) {
        r.status = JobStatus::running;
        r.started_at = wall_now();
    });
    try {
        const auto cfg = config(job_id);
        const auto ds = datasets_.get(cfg.dataset_id);
        auto result = execute(cfg, *ds, datasets_.grid(), options_.workers, [&](std::size_t done, std::size_t total) {
            update(job_id, [&](JobRecord& r) { r.progress = static_cast<double>(done) / static_cast<double>(total); });
        });
        const std::string key = "result/" + job_id;
        store_.put(key, nlohmann::json(result).dump());
        update(job_id, [&](JobRecord& r) {
            r.status = JobStatus::done;
            r.progress = 1.0;
            r.result = key;
            r.finished_at = wall_now();
        });
    } catch (const std::exception& e) {
        update(job_id, [&](JobRecord& r) {
            r.status = JobStatus::failed;
            r.error = e.what();
            r.finished_at = wall_now();
        });
    }
}

} // namespace epimob::service
