#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "sysfb/http.hpp"

#include <atomic>
#include <cstdlib>

namespace sysfb {
namespace {

std::atomic<std::size_t> g_attempts{0};

bool is_loopback(const std::string& host) {
    return host == "localhost" || host == "::1" || host == "[::1]" || host.rfind("127.", 0) == 0;
}

}  // namespace

bool network_denied() {
    const char* v = std::getenv("SYSFB_DENY_NETWORK");
    return v && *v && std::string(v) != "0";
}

std::size_t http_attempt_count() { return g_attempts.load(); }

Url parse_url(const std::string& url) {
    Url u;
    const auto sep = url.find("://");
    if (sep == std::string::npos) throw ValidationError("URL without scheme: " + url);
    u.scheme = url.substr(0, sep);
    if (u.scheme != "http" && u.scheme != "https") throw ValidationError("unsupported URL scheme: " + url);
    auto rest = url.substr(sep + 3);
    const auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    u.path = slash == std::string::npos ? "/" : rest.substr(slash);
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos) {
        u.host = authority.substr(0, colon);
        try {
            u.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("bad port in URL: " + url);
        }
    } else {
        u.host = authority;
        u.port = u.scheme == "https" ? 443 : 80;
    }
    if (u.host.empty()) throw ValidationError("URL without host: " + url);
    return u;
}

bool endpoint_reachable(const std::string& url, std::chrono::seconds timeout) {
    const auto u = parse_url(url);
    if (network_denied() && !is_loopback(u.host)) return false;
    ++g_attempts;
    httplib::Client client(u.scheme + "://" + u.host + ":" + std::to_string(u.port));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    auto res = client.Get("/");
    return res || res.error() != httplib::Error::Connection;
}

HttpResponse HttplibTransport::post_json(const std::string& url, const std::string& body, const Headers& headers) {
    const auto u = parse_url(url);
    if (network_denied() && !is_loopback(u.host)) {
        throw TransportError("network access denied (SYSFB_DENY_NETWORK): " + u.host);
    }
    ++g_attempts;
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    const auto base = u.scheme + "://" + u.host + ":" + std::to_string(u.port);
    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto res = client.Post(u.path, hdrs, body, "application/json");
    if (!res) {
        throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
}

nlohmann::json post_json(HttpTransport& transport, const std::string& url, const nlohmann::json& body,
                         const Headers& headers) {
    const auto res = transport.post_json(url, body.dump(), headers);
    if (res.status == 429 || res.status >= 500) {
        throw TransportError("POST " + url + " returned HTTP " + std::to_string(res.status));
    }
    if (res.status >= 400) {
        throw RequestError("POST " + url + " returned HTTP " + std::to_string(res.status) + ": " + res.body,
                           res.status);
    }
    if (res.status < 200 || res.status >= 300) {
        throw TransportError("POST " + url + " returned HTTP " + std::to_string(res.status));
    }
    try {
        return nlohmann::json::parse(res.body);
    } catch (const nlohmann::json::parse_error&) {
        throw ContractError("POST " + url + " returned a non-JSON body");
    }
}

}  // namespace sysfb
