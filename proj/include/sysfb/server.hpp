#pragma once

#include <memory>
#include <string>

#include "sysfb/workspace.hpp"

namespace sysfb {

/// HTTP status for an error thrown by an operation.
int http_status_for(const Error& e);

/// JSON API over a workspace:
///   GET  /clusters?kind=query|response
///   POST /regroup                 {"kind", "groups", "labels"?, "splits"?}
///   GET  /criteria[?kind=]        POST /criteria   GET /criteria/{id}
///   POST /render                  {"kind", "criteria", "record_id"?, "record"?, "feedback"?}
///   POST /ablations               {"kind", "criteria_ids", "sample_size"?, "seed"?}
///   GET  /ablations/{id}
///   GET  /reports/{id}
///   GET  /runs/{id}/log
/// Ablations run one at a time on a background worker.
class ApiServer {
public:
    explicit ApiServer(Workspace& workspace);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and returns the port; port 0 picks a free one.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sysfb
