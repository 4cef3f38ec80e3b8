#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sysfb/errors.hpp"

namespace sysfb {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Everything that talks to a remote endpoint goes through this interface,
/// so tests can swap in scripted transports.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& url, const std::string& body, const Headers& headers) = 0;
};

/// cpp-httplib backed transport. When SYSFB_DENY_NETWORK is set to a
/// non-empty value other than "0", any host other than loopback is refused.
class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}
    HttpResponse post_json(const std::string& url, const std::string& body, const Headers& headers) override;

private:
    std::chrono::seconds timeout_;
};

bool network_denied();
/// Number of outbound HTTP attempts made by HttplibTransport in this process.
std::size_t http_attempt_count();

struct Url {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;
};
Url parse_url(const std::string& url);

/// True when an http(s) endpoint accepts a connection. Refused hosts under
/// SYSFB_DENY_NETWORK count as unreachable without touching the network.
bool endpoint_reachable(const std::string& url, std::chrono::seconds timeout = std::chrono::seconds(2));

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};
    double multiplier = 2.0;
};

/// Runs `fn`, retrying TransportError with exponential backoff. Anything
/// else (including RequestError) propagates on the first throw.
template <typename F>
auto with_retries(const RetryPolicy& policy, F&& fn) -> decltype(fn()) {
    auto delay = policy.base_delay;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError&) {
            if (attempt >= policy.max_attempts) throw;
        }
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
    }
}

/// POSTs JSON and decodes a JSON reply. 4xx (except 429) → RequestError;
/// 429, 5xx and connection failures → TransportError; undecodable body →
/// ContractError.
nlohmann::json post_json(HttpTransport& transport, const std::string& url, const nlohmann::json& body,
                         const Headers& headers = {});

}  // namespace sysfb
