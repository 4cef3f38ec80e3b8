#include "test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sysfb::test {

std::filesystem::path source_dir() { return SYSFB_SOURCE_DIR; }

std::filesystem::path fixture_path(const std::string& rel) { return source_dir() / "tests" / "fixtures" / rel; }

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CriteriaSet fixture_criteria(const std::string& id) {
    return criteria_set_from_json(read_json_file(fixture_path("criteria/" + id + ".json")));
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    for (;;) {
        auto p = std::filesystem::temp_directory_path() /
                 (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        if (std::filesystem::create_directories(p)) {
            path_ = p;
            return;
        }
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::filesystem::path stage_desk_config(const std::filesystem::path& dir) {
    std::filesystem::copy_file(fixture_path("config.toml"), dir / "config.toml",
                               std::filesystem::copy_options::overwrite_existing);
    std::filesystem::copy_file(fixture_path("frequency.csv"), dir / "frequency.csv",
                               std::filesystem::copy_options::overwrite_existing);
    return dir / "config.toml";
}

std::size_t Gen::index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

std::size_t Gen::range(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
}

double Gen::unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

bool Gen::coin(double p) { return unit() < p; }

std::string Gen::word(std::size_t alphabet, std::size_t max_len) {
    std::string w;
    const auto len = range(1, max_len);
    for (std::size_t i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + index(alphabet)));
    return w;
}

std::vector<std::string> Gen::words(std::size_t n, std::size_t alphabet) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(word(alphabet));
    return out;
}

std::string Gen::sentence(std::size_t n_words, std::size_t alphabet) {
    static const char* seps[] = {" ", "  ", ", ", " - ", "; ", "\t", " (", ") ", "! "};
    std::string out;
    for (std::size_t i = 0; i < n_words; ++i) {
        if (i) out += seps[index(std::size(seps))];
        auto w = word(alphabet);
        if (coin(0.2)) w[0] = static_cast<char>(w[0] - 'a' + 'A');
        out += w;
    }
    if (coin(0.5)) out += coin(0.5) ? "." : "?";
    return out;
}

FeedbackRecord make_record(const std::string& id, TargetKind kind, const std::string& user_text,
                           const std::string& original, bool satisfied) {
    FeedbackRecord r;
    r.id = id;
    r.target_kind = kind;
    r.context.id = id;
    r.context.turns = {Turn{Speaker::user, user_text}};
    r.original_text = original;
    r.satisfied = satisfied;
    if (!satisfied) r.feedback_text = "feedback for " + id;
    if (kind == TargetKind::response) r.search_documents = std::vector<SearchDocument>{{"doc", "some content", {}}};
    return r;
}

ScopedEnv::ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) {
        ::setenv(name, value, 1);
    } else {
        ::unsetenv(name);
    }
}

ScopedEnv::~ScopedEnv() {
    if (old_) {
        ::setenv(name_.c_str(), old_->c_str(), 1);
    } else {
        ::unsetenv(name_.c_str());
    }
}

}  // namespace sysfb::test
