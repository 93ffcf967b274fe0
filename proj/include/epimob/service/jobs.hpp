#pragma once

#include "epimob/engine/ensemble.hpp"
#include "epimob/parallel.hpp"
#include "epimob/service/config.hpp"
#include "epimob/service/datasets.hpp"
#include "epimob/service/store.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace epimob::service {

// The job exists but its result is not available yet.
class NotReady : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class JobStatus { queued, running, done, failed };

const char* to_string(JobStatus s);
JobStatus job_status_from(const std::string& s);

struct JobRecord {
    std::string job_id;
    std::string fingerprint;
    std::string name;
    std::string dataset_id;
    JobStatus status = JobStatus::queued;
    double progress = 0.0;
    std::string result; // store key of the result once done
    std::string error;
    std::int64_t created_at = 0; // wall clock, seconds since epoch
    std::int64_t started_at = 0;
    std::int64_t finished_at = 0;
    std::uint64_t sequence = 0; // submission order

    friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

void to_json(nlohmann::json& j, const JobRecord& r);
void from_json(const nlohmann::json& j, JobRecord& r);

// Cost of a config in user-days times runs.
std::uint64_t workload(const SimulationConfig& cfg, const Dataset& ds);

// Checks that need the data set: step, policy windows, screening cells.
void validate_against(const SimulationConfig& cfg, const Dataset& ds, const geo::GridSystem& grid);

// Policies -> restricted mobility, POIs -> risk field, then the ensemble.
engine::EnsembleResult execute(const SimulationConfig& cfg, const Dataset& ds, const geo::GridSystem& grid,
                               unsigned workers, std::function<void(std::size_t, std::size_t)> progress = {});

struct JobManagerOptions {
    unsigned workers = default_worker_count(); // ensemble threads
    std::uint64_t budget = 50'000'000;         // users x days x m
    bool start = true;                         // false leaves the queue idle (tests)
};

// Jobs are executed one at a time from a FIFO queue; each ensemble uses the
// whole worker pool. Job records and results are persisted in the store, the
// result before the record that marks the job done.
class JobManager {
public:
    JobManager(KvStore& store, DatasetRegistry& datasets, JobManagerOptions options = {});
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    struct Submission {
        JobRecord record;
        bool cached = false; // an existing job with the same fingerprint was returned
    };

    // InvalidInput (with field path), NotFound (dataset) or CapacityError.
    Submission submit(const SimulationConfig& cfg);

    JobRecord get(const std::string& job_id) const;
    // Most recent first.
    std::vector<JobRecord> list(std::size_t limit = 50) const;
    SimulationConfig config(const std::string& job_id) const;
    // NotFound for unknown jobs, NotReady until done.
    std::shared_ptr<const engine::EnsembleResult> result(const std::string& job_id) const;

    // Blocks until the job is done or failed, or the timeout passes.
    JobRecord wait(const std::string& job_id, std::chrono::milliseconds timeout = std::chrono::hours(1)) const;

    // Starts the worker if it was not started at construction.
    void start();
    // Stops after the running job; queued jobs stay queued in the store.
    void stop();

    const JobManagerOptions& options() const { return options_; }

private:
    void recover();
    void worker_loop();
    void run_job(const std::string& job_id);
    void update(const std::string& job_id, const std::function<void(JobRecord&)>& fn);
    void persist(const JobRecord& r);

    KvStore& store_;
    DatasetRegistry& datasets_;
    JobManagerOptions options_;

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::map<std::string, JobRecord> jobs_;
    std::map<std::string, SimulationConfig> configs_;
    std::map<std::string, std::string> by_fingerprint_; // live (not failed) job per fingerprint
    std::deque<std::string> queue_;
    std::uint64_t next_sequence_ = 0;
    bool stopping_ = false;
    std::thread worker_;

    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::shared_ptr<const engine::EnsembleResult>> cache_;
    mutable std::deque<std::string> cache_order_;
};

} // namespace epimob::service
