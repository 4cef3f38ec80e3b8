#include "sysfb/endpoints.hpp"

#include <charconv>

#include "sysfb/errors.hpp"
#include "sysfb/hashing.hpp"
#include "sysfb/text_analysis.hpp"

namespace sysfb {
namespace {

struct StubUrl {
    std::string name;
    std::string key;
    std::string value;
};

StubUrl parse_stub(const std::string& url) {
    StubUrl s;
    auto rest = url.substr(std::string_view("stub://").size());
    const auto q = rest.find('?');
    s.name = rest.substr(0, q);
    if (q != std::string::npos) {
        const auto query = rest.substr(q + 1);
        const auto eq = query.find('=');
        if (eq == std::string::npos) throw ConfigError("stub option needs key=value: " + url);
        s.key = query.substr(0, eq);
        s.value = query.substr(eq + 1);
    }
    return s;
}

double unit_hash(std::string_view text) { return static_cast<double>(fnv1a64(text) % 1000) / 1000.0; }

class StubRefiner : public CompletionClient {
public:
    std::string complete(const CompletionRequest& request) override {
        auto out = original_from_refinement_prompt(request.prompt);
        const auto n = criteria_count_in_prompt(request.prompt);
        for (std::size_t i = 0; i < n; ++i) out += " detail";
        return out;
    }
};

class StubJudge : public CompletionClient {
public:
    explicit StubJudge(std::string pinned) : pinned_(std::move(pinned)) {}
    std::string complete(const CompletionRequest& request) override {
        std::string v = pinned_;
        if (v.empty()) v = fnv1a64(request.prompt) % 5 == 0 ? "N" : "Y";
        return "The stub judge read the dialog and the candidate text.\n" + v + "\n" + v;
    }

private:
    std::string pinned_;
};

class StubChecker : public ScoreClient {
public:
    explicit StubChecker(std::optional<double> constant) : constant_(constant) {}
    double score(TargetKind, const std::string&, const std::string& text) override {
        if (constant_) return *constant_;
        const double h = unit_hash(text) * 0.5;
        return tokenize(text).size() >= 4 ? 0.5 + h : h;
    }

private:
    std::optional<double> constant_;
};

class StubPageCount : public SearchCountClient {
public:
    std::int64_t pages(const std::string& query) override {
        return static_cast<std::int64_t>(fnv1a64(query) % 100000);
    }
};

void reject_options(const StubUrl& s, const std::string& url) {
    if (!s.key.empty()) throw ConfigError("stub does not take options: " + url);
}

}  // namespace

bool is_stub_url(const std::string& url) { return url.rfind("stub://", 0) == 0; }
bool is_builtin_url(const std::string& url) { return url == "builtin"; }
bool is_remote_url(const std::string& url) { return url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0; }

std::string original_from_refinement_prompt(const std::string& prompt) {
    for (const char* marker : {"Below is the bot's unsatisfactory query.\n", "Below is the bot's unsatisfactory response.\n"}) {
        const auto pos = prompt.find(marker);
        if (pos == std::string::npos) continue;
        const auto start = pos + std::char_traits<char>::length(marker);
        auto end = prompt.find('\n', start);
        if (end == std::string::npos) end = prompt.size();
        return prompt.substr(start, end - start);
    }
    throw ContractError("stub refiner received a prompt that is not a refinement prompt");
}

std::size_t criteria_count_in_prompt(const std::string& prompt) {
    const auto head = prompt.substr(0, prompt.find("Below is the dialog context."));
    std::size_t n = 0;
    while (head.find("(" + std::to_string(n + 1) + ") ") != std::string::npos) ++n;
    return n;
}

std::shared_ptr<CompletionClient> make_completion_client(const std::string& url, const std::string& api_key,
                                                         std::shared_ptr<HttpTransport> transport) {
    if (is_remote_url(url)) return std::make_shared<ChatCompletionClient>(url, std::move(transport), api_key);
    if (!is_stub_url(url)) throw ConfigError("unsupported completion endpoint: " + url);
    const auto s = parse_stub(url);
    if (s.name == "refiner") {
        reject_options(s, url);
        return std::make_shared<StubRefiner>();
    }
    if (s.name == "judge") {
        if (!s.key.empty() && (s.key != "verdict" || (s.value != "Y" && s.value != "N"))) {
            throw ConfigError("stub judge takes ?verdict=Y or ?verdict=N: " + url);
        }
        return std::make_shared<StubJudge>(s.value);
    }
    if (s.name == "feedback") {
        reject_options(s, url);
        return std::make_shared<FunctionCompletionClient>([](const CompletionRequest&) { return std::string(kStubFeedback); });
    }
    throw ConfigError("unknown completion stub: " + url);
}

std::shared_ptr<ScoreClient> make_score_client(const std::string& url, std::shared_ptr<HttpTransport> transport) {
    if (is_remote_url(url)) return std::make_shared<HttpScoreClient>(url, std::move(transport));
    if (!is_stub_url(url)) throw ConfigError("unsupported checker endpoint: " + url);
    const auto s = parse_stub(url);
    if (s.name != "checker") throw ConfigError("unknown checker stub: " + url);
    std::optional<double> constant;
    if (!s.key.empty()) {
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.value.data(), s.value.data() + s.value.size(), v);
        if (s.key != "score" || ec != std::errc{} || ptr != s.value.data() + s.value.size()) {
            throw ConfigError("stub checker takes ?score=<number>: " + url);
        }
        constant = v;
    }
    return std::make_shared<StubChecker>(constant);
}

std::shared_ptr<SearchCountClient> make_search_client(const std::string& url, std::shared_ptr<HttpTransport> transport) {
    if (url.empty()) return nullptr;
    if (is_remote_url(url)) return std::make_shared<HttpSearchCountClient>(url, std::move(transport));
    if (url == "stub://pagecount") return std::make_shared<StubPageCount>();
    throw ConfigError("unsupported search-count endpoint: " + url);
}

std::shared_ptr<EmbeddingProvider> make_embedder(const std::string& url, std::shared_ptr<HttpTransport> transport,
                                                 RetryPolicy retry, std::size_t parallelism) {
    if (url.empty() || is_builtin_url(url) || url == "stub://embedder") return std::make_shared<HashedBowEmbedder>();
    if (is_remote_url(url)) {
        return std::make_shared<RemoteEmbeddingProvider>(url, std::move(transport), retry, 64, parallelism);
    }
    throw ConfigError("unsupported embedding endpoint: " + url);
}

std::shared_ptr<GrammarChecker> make_grammar_checker(const std::string& url, std::shared_ptr<HttpTransport> transport) {
    if (url.empty() || is_builtin_url(url) || url == "stub://grammar") return std::make_shared<HeuristicGrammarChecker>();
    if (is_remote_url(url)) return std::make_shared<HttpGrammarChecker>(url, std::move(transport));
    throw ConfigError("unsupported grammar endpoint: " + url);
}

}  // namespace sysfb
