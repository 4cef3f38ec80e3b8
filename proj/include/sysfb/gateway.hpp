#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>

#include "sysfb/data_model.hpp"
#include "sysfb/http.hpp"

namespace sysfb {

inline constexpr int kRefineMaxTokens = 128;
inline constexpr int kJudgeMaxTokens = 512;
inline constexpr int kFeedbackMaxTokens = 256;

struct CompletionRequest {
    std::string endpoint_id;
    std::string model_id;
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = kRefineMaxTokens;

    /// SHA-256 over a length-prefixed encoding of every field.
    std::string cache_key() const;
    json to_json() const;
};

/// A generative model behind some protocol. Implementations throw
/// TransportError (retryable) or RequestError (not retryable).
class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
};

/// Chat-completion style HTTP endpoint: one user message carrying the prompt.
class ChatCompletionClient : public CompletionClient {
public:
    ChatCompletionClient(std::string url, std::shared_ptr<HttpTransport> transport, std::string api_key = {});
    std::string complete(const CompletionRequest& request) override;

private:
    std::string url_;
    std::shared_ptr<HttpTransport> transport_;
    std::string api_key_;
};

/// Adapts a callable; handy for scripted stubs.
class FunctionCompletionClient : public CompletionClient {
public:
    explicit FunctionCompletionClient(std::function<std::string(const CompletionRequest&)> fn) : fn_(std::move(fn)) {}
    std::string complete(const CompletionRequest& request) override { return fn_(request); }

private:
    std::function<std::string(const CompletionRequest&)> fn_;
};

/// Content-addressed store of model outputs. Always keeps an in-memory map;
/// with a directory it also persists one "<key>.json" file per entry
/// holding the request and the response. Writes are write-once per key.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const std::string& key);
    void put(const std::string& key, const json& request, const std::string& response);
    std::size_t size() const;
    const std::optional<std::filesystem::path>& directory() const { return dir_; }

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::string> memory_;
    std::optional<std::filesystem::path> dir_;
};

struct GatewayStats {
    std::size_t cache_hits = 0;
    std::size_t client_calls = 0;
};

/// Fronts one model endpoint: caching, in-flight de-duplication, retries,
/// a bound on concurrent requests, and an optional request-rate limit.
class Gateway {
public:
    struct Options {
        std::string endpoint_id = "default";
        std::string model_id = "default";
        RetryPolicy retry{};
        std::ptrdiff_t parallelism = 4;
        double requests_per_second = 0.0;  // 0 = unlimited
    };

    Gateway(std::shared_ptr<CompletionClient> client, std::shared_ptr<ResponseCache> cache, Options options);

    std::string complete(const CompletionRequest& request);
    /// Greedy completion of `prompt` against this gateway's endpoint/model.
    std::string complete(const std::string& prompt, int max_tokens);

    const std::string& endpoint_id() const { return options_.endpoint_id; }
    const std::string& model_id() const { return options_.model_id; }
    GatewayStats stats() const;

private:
    std::string call_client(const CompletionRequest& request);
    void pace();

    std::shared_ptr<CompletionClient> client_;
    std::shared_ptr<ResponseCache> cache_;
    Options options_;
    std::counting_semaphore<> slots_;
    std::mutex inflight_mu_;
    std::map<std::string, std::shared_future<std::string>> inflight_;
    std::mutex pace_mu_;
    std::chrono::steady_clock::time_point next_slot_{};
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> calls_{0};
};

/// Verdict = the last line that is exactly "Y" or "N" after trimming;
/// reasoning = text before the first such line (trimmed).
/// Throws VerdictParseError when there is no such line.
JudgeVerdict parse_yn(std::string_view raw);

/// Instance-level feedback written by a model for an unsatisfactory response.
std::string generate_model_feedback(const DialogContext& context, const std::string& original, Gateway& gateway);

}  // namespace sysfb
