#include "sysfb/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sysfb/errors.hpp"

namespace sysfb {
namespace {

class TomlParser {
public:
    explicit TomlParser(std::string_view text) : s_(text) {}

    json parse() {
        json root = json::object();
        json* table = &root;
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) break;
            if (peek() == '[') {
                table = &open_table(root);
            } else {
                parse_key_value(*table);
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ConfigError("config line " + std::to_string(line_) + ": " + what); }
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }
    char get() {
        const char c = s_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    void skip_spaces() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') ++pos_;
        }
    }
    void skip_ws_comments_newlines() {
        for (;;) {
            skip_spaces();
            skip_comment();
            if (peek() == '\r') ++pos_;
            if (peek() == '\n') {
                get();
                continue;
            }
            return;
        }
    }
    void end_of_line() {
        skip_spaces();
        skip_comment();
        if (peek() == '\r') ++pos_;
        if (eof()) return;
        if (peek() != '\n') fail("unexpected text after value");
        get();
    }

    std::string parse_key_part() {
        skip_spaces();
        if (peek() == '"') return parse_basic_string();
        if (peek() == '\'') return parse_literal_string();
        std::string key;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
            key.push_back(get());
        }
        if (key.empty()) fail("expected a key");
        return key;
    }

    std::vector<std::string> parse_dotted_key() {
        std::vector<std::string> parts{parse_key_part()};
        skip_spaces();
        while (peek() == '.') {
            ++pos_;
            parts.push_back(parse_key_part());
            skip_spaces();
        }
        return parts;
    }

    json& open_table(json& root) {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        const auto parts = parse_dotted_key();
        if (peek() != ']') fail("expected ']' after table name");
        ++pos_;
        json* t = &root;
        for (const auto& p : parts) {
            auto& next = (*t)[p];
            if (next.is_null()) next = json::object();
            if (!next.is_object()) fail("\"" + p + "\" is not a table");
            t = &next;
        }
        return *t;
    }

    void parse_key_value(json& table) {
        const auto parts = parse_dotted_key();
        if (peek() != '=') fail("expected '=' after key");
        ++pos_;
        skip_spaces();
        json value = parse_value();
        json* t = &table;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            auto& next = (*t)[parts[i]];
            if (next.is_null()) next = json::object();
            if (!next.is_object()) fail("\"" + parts[i] + "\" is not a table");
            t = &next;
        }
        if (t->contains(parts.back())) fail("duplicate key \"" + parts.back() + "\"");
        (*t)[parts.back()] = std::move(value);
    }

    json parse_value() {
        const char c = peek();
        if (c == '"') return interpolate(parse_basic_string());
        if (c == '\'') return interpolate(parse_literal_string());
        if (c == '[') return parse_array();
        if (c == '{') fail("inline tables are not supported");
        if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return false;
        }
        return parse_number();
    }

    json parse_array() {
        ++pos_;
        json arr = json::array();
        for (;;) {
            skip_ws_comments_newlines();
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            if (eof()) fail("unterminated array");
            arr.push_back(parse_value());
            skip_ws_comments_newlines();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != ']') {
                fail("expected ',' or ']' in array");
            }
        }
    }

    json parse_number() {
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_')) {
            tok.push_back(get());
        }
        if (tok.empty()) fail("expected a value");
        std::string digits;
        for (char ch : tok) {
            if (ch != '_') digits.push_back(ch);
        }
        const bool is_float = digits.find_first_of(".eE") != std::string::npos && digits.rfind("0x", 0) != 0;
        const char* first = digits.data() + (digits.front() == '+' ? 1 : 0);
        const char* last = digits.data() + digits.size();
        if (is_float) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last) fail("bad number \"" + tok + "\"");
            return v;
        }
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) fail("bad value \"" + tok + "\"");
        return v;
    }

    std::string parse_literal_string() {
        ++pos_;
        std::string out;
        while (!eof() && peek() != '\'') {
            if (peek() == '\n') fail("newline in string");
            out.push_back(get());
        }
        if (eof()) fail("unterminated string");
        ++pos_;
        return out;
    }

    std::string parse_basic_string() {
        ++pos_;
        std::string out;
        for (;;) {
            if (eof()) fail("unterminated string");
            if (peek() == '\n') fail("newline in string");
            const char c = get();
            if (c == '"') return out;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (eof()) fail("unterminated escape");
            const char e = get();
            switch (e) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case 'u': append_unicode(out, 4); break;
                case 'U': append_unicode(out, 8); break;
                default: fail(std::string("unknown escape \\") + e);
            }
        }
    }

    void append_unicode(std::string& out, int digits) {
        if (pos_ + static_cast<std::size_t>(digits) > s_.size()) fail("short unicode escape");
        std::uint32_t cp = 0;
        auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + pos_ + digits, cp, 16);
        if (ec != std::errc{} || ptr != s_.data() + pos_ + digits) fail("bad unicode escape");
        pos_ += static_cast<std::size_t>(digits);
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }

    std::string interpolate(const std::string& raw) {
        std::string out;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw.compare(i, 2, "${") == 0) {
                const auto close = raw.find('}', i + 2);
                if (close == std::string::npos) fail("unterminated ${...}");
                const auto name = raw.substr(i + 2, close - i - 2);
                const char* v = std::getenv(name.c_str());
                if (!v) fail("environment variable " + name + " is not set");
                out += v;
                i = close;
            } else {
                out.push_back(raw[i]);
            }
        }
        return out;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

std::string get_string(const json& j, const char* key, const std::string& fallback) {
    const auto* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(std::string("config key \"") + key + "\" must be a string");
    return v->get<std::string>();
}

double get_number(const json& j, const char* key, double fallback) {
    const auto* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(std::string("config key \"") + key + "\" must be a number");
    return v->get<double>();
}

std::uint64_t get_count(const json& j, const char* key, std::uint64_t fallback) {
    const auto* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        throw ConfigError(std::string("config key \"") + key + "\" must be a non-negative integer");
    }
    return v->get<std::uint64_t>();
}

const json& get_table(const json& j, const char* key) {
    static const json empty = json::object();
    const auto* v = find(j, key);
    if (!v) return empty;
    if (!v->is_object()) throw ConfigError(std::string("config key \"") + key + "\" must be a table");
    return *v;
}

EndpointConfig endpoint(const json& endpoints, const char* name, const EndpointConfig& fallback) {
    const auto* t = find(endpoints, name);
    if (!t) return fallback;
    if (!t->is_object()) throw ConfigError(std::string("[endpoints.") + name + "] must be a table");
    EndpointConfig e;
    e.url = get_string(*t, "url", "");
    if (e.url.empty()) throw ConfigError(std::string("[endpoints.") + name + "] needs a url");
    e.model = get_string(*t, "model", "default");
    e.api_key = get_string(*t, "api_key", "");
    e.requests_per_second = get_number(*t, "requests_per_second", 0.0);
    return e;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    auto out = (path.is_absolute() ? path : base / path).lexically_normal();
    if (!out.has_filename() && out.has_parent_path() && out != out.root_path()) out = out.parent_path();
    return out;
}

}  // namespace

json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

RunConfig config_from_toml(const json& doc, const std::filesystem::path& config_path) {
    RunConfig c;
    c.config_path = config_path;
    const auto base = std::filesystem::absolute(config_path.has_parent_path() ? config_path.parent_path() : std::filesystem::path("."));
    c.run_dir = resolve(base, get_string(doc, "run_dir", "."));
    if (const auto ft = get_string(doc, "frequency_table", ""); !ft.empty()) c.frequency_table = resolve(base, ft);
    c.C = get_number(doc, "C", c.C);
    c.parallelism = get_count(doc, "parallelism", c.parallelism);
    c.target_precision = get_number(doc, "target_precision", c.target_precision);

    const auto& k = get_table(doc, "k");
    c.k_query = get_count(k, "query", c.k_query);
    c.k_response = get_count(k, "response", c.k_response);
    const auto& seeds = get_table(doc, "seeds");
    c.cluster_seed = get_count(seeds, "cluster", c.cluster_seed);
    c.sample_seed = get_count(seeds, "sample", c.sample_seed);
    const auto& report = get_table(doc, "report");
    c.n_representatives = get_count(report, "representatives", c.n_representatives);
    c.n_top_terms = get_count(report, "top_terms", c.n_top_terms);
    const auto& retry = get_table(doc, "retry");
    c.retry.max_attempts = static_cast<int>(get_count(retry, "max_attempts", static_cast<std::uint64_t>(c.retry.max_attempts)));
    c.retry.base_delay = std::chrono::milliseconds(get_count(retry, "base_delay_ms", 500));
    c.retry.multiplier = get_number(retry, "multiplier", c.retry.multiplier);

    const auto& endpoints = get_table(doc, "endpoints");
    for (const char* required : {"refiner", "judge", "checker"}) {
        if (!find(endpoints, required)) throw ConfigError(std::string("missing [endpoints.") + required + "]");
    }
    c.refiner = endpoint(endpoints, "refiner", {});
    c.judge = endpoint(endpoints, "judge", {});
    c.checker = endpoint(endpoints, "checker", {});
    c.embedder = endpoint(endpoints, "embedder", EndpointConfig{"builtin", "default", "", 0.0});
    c.feedback = endpoint(endpoints, "feedback", c.refiner);
    c.search = endpoint(endpoints, "search", EndpointConfig{"", "default", "", 0.0});
    c.grammar = endpoint(endpoints, "grammar", EndpointConfig{"builtin", "default", "", 0.0});
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_toml(parse_toml(buf.str()), path);
}

void validate(const RunConfig& c) {
    if (!(c.C > 0.0)) throw ConfigError("C must be positive");
    if (!(c.target_precision > 0.0 && c.target_precision <= 1.0)) throw ConfigError("target_precision must be in (0, 1]");
    if (c.k_query == 0 || c.k_response == 0) throw ConfigError("k must be at least 1");
    if (c.parallelism == 0) throw ConfigError("parallelism must be at least 1");
    if (c.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
    if (!(c.retry.multiplier >= 1.0)) throw ConfigError("retry.multiplier must be at least 1");
    if (c.frequency_table && !std::filesystem::is_regular_file(*c.frequency_table)) {
        throw ConfigError("frequency_table does not exist: " + c.frequency_table->string());
    }
    if (std::filesystem::exists(c.run_dir) && !std::filesystem::is_directory(c.run_dir)) {
        throw ConfigError("run_dir is not a directory: " + c.run_dir.string());
    }
    for (const auto* e : {&c.refiner, &c.judge, &c.checker, &c.embedder, &c.feedback, &c.grammar}) {
        if (e->url.empty()) throw ConfigError("endpoint url missing");
        if (e->requests_per_second < 0) throw ConfigError("requests_per_second must be non-negative");
    }
}

}  // namespace sysfb
