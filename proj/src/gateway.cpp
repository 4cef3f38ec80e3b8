#include "sysfb/gateway.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "sysfb/errors.hpp"
#include "sysfb/hashing.hpp"
#include "sysfb/prompts.hpp"
#include "sysfb/text_analysis.hpp"

namespace sysfb {
namespace {

void append_field(std::string& out, std::string_view field) {
    out += std::to_string(field.size());
    out.push_back(':');
    out.append(field);
    out.push_back(';');
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SemaphoreGuard() { s_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    std::counting_semaphore<>& s_;
};

}  // namespace

std::string CompletionRequest::cache_key() const {
    std::string material;
    append_field(material, endpoint_id);
    append_field(material, model_id);
    append_field(material, prompt);
    append_field(material, format_double(temperature));
    append_field(material, std::to_string(max_tokens));
    return sha256_hex(material);
}

json CompletionRequest::to_json() const {
    return json{{"endpoint_id", endpoint_id},
                {"model_id", model_id},
                {"prompt", prompt},
                {"temperature", temperature},
                {"max_tokens", max_tokens}};
}

ChatCompletionClient::ChatCompletionClient(std::string url, std::shared_ptr<HttpTransport> transport,
                                           std::string api_key)
    : url_(std::move(url)), transport_(std::move(transport)), api_key_(std::move(api_key)) {}

std::string ChatCompletionClient::complete(const CompletionRequest& request) {
    json body{{"model", request.model_id},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    Headers headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    const auto reply = post_json(*transport_, url_, body, headers);
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw ContractError("completion content is not a string");
        return content.get<std::string>();
    } catch (const json::exception&) {
        throw ContractError("completion reply lacks choices[0].message.content");
    }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw IoError("cannot create cache directory " + dir_->string() + ": " + ec.message());
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
    {
        std::lock_guard lock(mu_);
        auto it = memory_.find(key);
        if (it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    const auto path = *dir_ / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        auto entry = json::parse(in);
        auto response = entry.at("response").get<std::string>();
        std::lock_guard lock(mu_);
        memory_.emplace(key, response);
        return response;
    } catch (const json::exception&) {
        return std::nullopt;  // torn or foreign file: treat as a miss
    }
}

void ResponseCache::put(const std::string& key, const json& request, const std::string& response) {
    {
        std::lock_guard lock(mu_);
        if (!memory_.emplace(key, response).second) return;
    }
    if (!dir_) return;
    const auto final_path = *dir_ / (key + ".json");
    if (std::filesystem::exists(final_path)) return;
    std::ostringstream tid;
    tid << std::this_thread::get_id();
    const auto tmp = *dir_ / (key + ".tmp." + tid.str());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cache entry " + tmp.string());
        out << json{{"key", key}, {"request", request}, {"response", response}}.dump(2) << '\n';
    }
    std::error_code ec;
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
    }
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mu_);
    return memory_.size();
}

Gateway::Gateway(std::shared_ptr<CompletionClient> client, std::shared_ptr<ResponseCache> cache, Options options)
    : client_(std::move(client)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      options_(std::move(options)),
      slots_(std::max<std::ptrdiff_t>(1, options_.parallelism)) {
    if (!client_) throw ValidationError("gateway needs a completion client");
}

void Gateway::pace() {
    if (options_.requests_per_second <= 0.0) return;
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / options_.requests_per_second));
    std::chrono::steady_clock::time_point wake;
    {
        std::lock_guard lock(pace_mu_);
        const auto now = std::chrono::steady_clock::now();
        wake = std::max(now, next_slot_);
        next_slot_ = wake + interval;
    }
    std::this_thread::sleep_until(wake);
}

std::string Gateway::call_client(const CompletionRequest& request) {
    SemaphoreGuard guard(slots_);
    pace();
    ++calls_;
    return client_->complete(request);
}

std::string Gateway::complete(const CompletionRequest& request) {
    if (request.prompt.empty()) throw DomainError("completion prompt must be non-empty");
    const auto key = request.cache_key();
    if (auto hit = cache_->get(key)) {
        ++hits_;
        return *hit;
    }

    std::promise<std::string> promise;
    std::shared_future<std::string> pending;
    bool owner = false;
    {
        std::lock_guard lock(inflight_mu_);
        auto it = inflight_.find(key);
        if (it != inflight_.end()) {
            pending = it->second;
        } else {
            pending = promise.get_future().share();
            inflight_.emplace(key, pending);
            owner = true;
        }
    }
    if (!owner) {
        ++hits_;
        return pending.get();
    }

    auto finish = [&] {
        std::lock_guard lock(inflight_mu_);
        inflight_.erase(key);
    };
    try {
        std::string result;
        if (auto hit = cache_->get(key)) {
            ++hits_;
            result = *hit;
        } else {
            result = with_retries(options_.retry, [&] { return call_client(request); });
            cache_->put(key, request.to_json(), result);
        }
        promise.set_value(result);
        finish();
        return result;
    } catch (...) {
        promise.set_exception(std::current_exception());
        finish();
        throw;
    }
}

std::string Gateway::complete(const std::string& prompt, int max_tokens) {
    CompletionRequest request{options_.endpoint_id, options_.model_id, prompt, 0.0, max_tokens};
    return complete(request);
}

GatewayStats Gateway::stats() const { return GatewayStats{hits_.load(), calls_.load()}; }

JudgeVerdict parse_yn(std::string_view raw) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto end = raw.find('\n', start);
        if (end == std::string_view::npos) end = raw.size();
        lines.push_back(raw.substr(start, end - start));
        start = end + 1;
    }
    std::optional<std::size_t> first;
    std::optional<bool> verdict;
    std::size_t first_offset = 0;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto t = trim(lines[i]);
        if (t == "Y" || t == "N") {
            if (!first) {
                first = i;
                first_offset = offset;
            }
            verdict = (t == "Y");
        }
        offset += lines[i].size() + 1;
    }
    if (!verdict) throw VerdictParseError(std::string(raw));
    return JudgeVerdict{trim(raw.substr(0, first_offset)), *verdict, std::string(raw)};
}

std::string generate_model_feedback(const DialogContext& context, const std::string& original, Gateway& gateway) {
    Slots slots;
    slots.emplace(slot::dialog_context, serialize_dialog(context));
    slots.emplace(slot::original_response, original);
    return gateway.complete(render(PromptName::feedback_generate, slots), kFeedbackMaxTokens);
}

}  // namespace sysfb
