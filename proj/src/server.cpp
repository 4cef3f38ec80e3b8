#include "sysfb/server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "json_fields.hpp"
#include "sysfb/hashing.hpp"

namespace sysfb {

using namespace detail;

int http_status_for(const Error& e) {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const DomainError*>(&e) || dynamic_cast<const RenderError*>(&e) ||
        dynamic_cast<const ConfigError*>(&e))
        return 400;
    if (dynamic_cast<const ConflictError*>(&e)) return 409;
    if (dynamic_cast<const TransportError*>(&e)) return 503;
    if (dynamic_cast<const ContractError*>(&e) || dynamic_cast<const RequestError*>(&e) ||
        dynamic_cast<const VerdictParseError*>(&e))
        return 502;
    return 500;
}

namespace {

json error_body(std::string_view kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
    send(res, status, error_body(kind, message));
}

json parse_body(const httplib::Request& req) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("request body is not valid JSON: ") + e.what());
    }
}

TargetKind kind_param(const httplib::Request& req) {
    if (!req.has_param("kind")) throw ValidationError("missing query parameter \"kind\"");
    return parse_target_kind(req.get_param_value("kind"));
}

struct Job {
    std::string id;
    TargetKind kind = TargetKind::query;
    AblationRequest request;
    std::string status = "queued";
    std::vector<std::string> transitions{"queued"};
    std::optional<json> result;
    std::optional<json> error;
};

json job_json(const Job& job) {
    json j{{"id", job.id},
           {"kind", to_string(job.kind)},
           {"criteria_ids", job.request.criteria_ids},
           {"status", job.status},
           {"transitions", job.transitions}};
    if (job.result) j["result"] = *job.result;
    if (job.error) j["error"] = *job.error;
    return j;
}

}  // namespace

struct ApiServer::Impl {
    Workspace& ws;
    httplib::Server http;
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::string, Job> jobs;
    std::deque<std::string> queue;
    bool stopping = false;
    std::uint64_t counter = 0;
    std::thread worker;

    explicit Impl(Workspace& w) : ws(w) {
        routes();
        worker = std::thread([this] { work(); });
    }

    ~Impl() {
        {
            std::lock_guard lock(mu);
            stopping = true;
        }
        cv.notify_all();
        http.stop();
        if (worker.joinable()) worker.join();
    }

    // Runs a handler, translating toolkit errors to status codes.
    template <typename F>
    auto guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, http_status_for(e), e.kind(), e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "validation_error", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal_error", e.what());
            }
        };
    }

    void work() {
        for (;;) {
            std::string id;
            {
                std::unique_lock lock(mu);
                cv.wait(lock, [this] { return stopping || !queue.empty(); });
                if (stopping) return;
                id = queue.front();
                queue.pop_front();
                auto& job = jobs.at(id);
                job.status = "running";
                job.transitions.push_back("running");
            }
            TargetKind kind;
            AblationRequest request;
            {
                std::lock_guard lock(mu);
                kind = jobs.at(id).kind;
                request = jobs.at(id).request;
            }
            std::optional<json> result;
            std::optional<json> failure;
            try {
                result = json(ws.ablate(kind, request));
            } catch (const Error& e) {
                failure = json{{"kind", e.kind()}, {"message", e.what()}};
            } catch (const std::exception& e) {
                failure = json{{"kind", "internal_error"}, {"message", e.what()}};
            }
            std::lock_guard lock(mu);
            auto& job = jobs.at(id);
            job.status = result ? "done" : "failed";
            job.transitions.push_back(job.status);
            job.result = std::move(result);
            job.error = std::move(failure);
        }
    }

    std::string next_job_id(const json& body) {
        std::lock_guard lock(mu);
        const auto now = std::chrono::system_clock::now().time_since_epoch().count();
        const auto seed = body.dump() + ";" + std::to_string(++counter) + ";" + std::to_string(now);
        return "ablation-" + sha256_hex(seed).substr(0, 12);
    }

    void routes() {
        http.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
                     send(res, 200, {{"ok", true}});
                 }));

        http.Get("/clusters", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const auto kind = kind_param(req);
                     auto report = ws.clusters(kind);
                     if (!report) {
                         send_error(res, 404, "not_found",
                                    "no clusters for kind \"" + std::string(to_string(kind)) + "\"");
                         return;
                     }
                     send(res, 200, json(*report));
                 }));

        http.Post("/regroup", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = parse_body(req);
                      const auto kind = parse_target_kind(require_string(body, "kind"));
                      if (!ws.clusters(kind)) {
                          send_error(res, 404, "not_found",
                                     "no clusters for kind \"" + std::string(to_string(kind)) + "\"");
                          return;
                      }
                      const auto plan = regroup_plan_from_json(body);
                      send(res, 200, json(ws.regroup(kind, plan)));
                  }));

        http.Get("/criteria", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     std::optional<TargetKind> kind;
                     if (req.has_param("kind")) kind = parse_target_kind(req.get_param_value("kind"));
                     json items = json::array();
                     for (const auto& s : ws.criteria().list()) {
                         if (!kind || s.set.target_kind == *kind) items.push_back(to_json(s));
                     }
                     send(res, 200, {{"criteria", items}});
                 }));

        http.Get(R"(/criteria/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const std::string id = req.matches[1];
                     std::optional<StoredCriteria> s;
                     if (is_safe_id(id)) s = ws.criteria().get(id);
                     if (!s) {
                         send_error(res, 404, "not_found", "unknown criteria set \"" + id + "\"");
                         return;
                     }
                     send(res, 200, to_json(*s));
                 }));

        http.Post("/criteria", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto set = criteria_set_from_json(parse_body(req));
                      const bool existed = ws.criteria().get(set.id).has_value();
                      const auto stored = ws.criteria().save(set);
                      send(res, existed ? 200 : 201, to_json(stored));
                  }));

        http.Post("/render", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = parse_body(req);
                      RenderRequest r;
                      r.kind = parse_target_kind(require_string(body, "kind"));
                      for (const auto& c : require_array(body, "criteria")) {
                          if (!c.is_string()) throw ValidationError("criteria entries must be strings");
                          r.criteria.push_back(c.get<std::string>());
                      }
                      r.record_id = optional_string(body, "record_id");
                      if (body.contains("record") && !body["record"].is_null()) {
                          r.record = feedback_record_from_json(body["record"]);
                      }
                      r.feedback = optional_string(body, "feedback");
                      send(res, 200, {{"prompt", ws.render_prompt(r)}});
                  }));

        http.Post("/ablations", guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const auto body = parse_body(req);
                      Job job;
                      job.kind = parse_target_kind(require_string(body, "kind"));
                      for (const auto& c : require_array(body, "criteria_ids")) {
                          if (!c.is_string()) throw ValidationError("criteria_ids entries must be strings");
                          job.request.criteria_ids.push_back(c.get<std::string>());
                      }
                      if (job.request.criteria_ids.size() < 2) {
                          throw ValidationError("an ablation needs at least two criteria sets");
                      }
                      for (const auto& id : job.request.criteria_ids) {
                          const auto set = ws.criteria_set(id);
                          if (set.target_kind != job.kind) {
                              throw ValidationError("criteria set \"" + id + "\" targets " +
                                                    std::string(to_string(set.target_kind)));
                          }
                      }
                      if (body.contains("sample_size")) job.request.sample_size = require_count(body, "sample_size");
                      if (body.contains("seed")) job.request.seed = require_count(body, "seed");
                      ws.check_endpoints();

                      job.id = next_job_id(body);
                      job.request.id = job.id;
                      job.request.wait_for_lock = true;
                      const auto id = job.id;
                      {
                          std::lock_guard lock(mu);
                          jobs.emplace(id, std::move(job));
                          queue.push_back(id);
                      }
                      cv.notify_one();
                      send(res, 202, {{"id", id}, {"status", "queued"}});
                  }));

        http.Get(R"(/ablations/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const std::string id = req.matches[1];
                     std::lock_guard lock(mu);
                     auto it = jobs.find(id);
                     if (it == jobs.end()) {
                         send_error(res, 404, "not_found", "unknown ablation \"" + id + "\"");
                         return;
                     }
                     send(res, 200, job_json(it->second));
                 }));

        http.Get(R"(/reports/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const std::string id = req.matches[1];
                     auto report = ws.report(id);
                     if (!report) {
                         send_error(res, 404, "not_found", "unknown report \"" + id + "\"");
                         return;
                     }
                     send(res, 200, *report);
                 }));

        http.Get(R"(/runs/([^/]+)/log)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const std::string id = req.matches[1];
                     auto log = ws.run_log(id);
                     if (!log) {
                         send_error(res, 404, "not_found", "unknown run \"" + id + "\"");
                         return;
                     }
                     send(res, 200, json(*log));
                 }));

        const auto ui = ws.run_dir() / "ui";
        if (std::filesystem::is_directory(ui)) http.set_mount_point("/ui", ui.string());
    }
};

ApiServer::ApiServer(Workspace& workspace) : impl_(std::make_unique<Impl>(workspace)) {}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->http.bind_to_any_port(host);
        if (p < 0) throw IoError("cannot bind " + host);
        return p;
    }
    if (!impl_->http.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ApiServer::run() { impl_->http.listen_after_bind(); }

void ApiServer::stop() { impl_->http.stop(); }

}  // namespace sysfb
