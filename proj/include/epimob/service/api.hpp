#pragma once

#include "epimob/service/datasets.hpp"
#include "epimob/service/jobs.hpp"

#include <memory>
#include <string>

namespace epimob::service {

// The /v1 HTTP JSON API over a data set registry and a job manager. Errors
// are {"error": message, "field": path-or-null} with 400 for invalid input,
// 404 for unknown ids, 409 for results not ready, 413 for configs above the
// capacity budget and 500 for integrity failures.
class ApiServer {
public:
    ApiServer(DatasetRegistry& datasets, JobManager& jobs);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    // Serves until stop(); requires bind().
    void listen();
    // bind() plus listen() on a background thread; returns the bound port.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace epimob::service
