#include "sysfb/criteria_store.hpp"

#include <algorithm>
#include <fstream>

#include "json_fields.hpp"
#include "sysfb/errors.hpp"
#include "sysfb/hashing.hpp"

namespace sysfb {
using namespace detail;

std::string criteria_content_hash(const CriteriaSet& set) {
    json canonical{{"target_kind", to_string(set.target_kind)}, {"label", set.label}, {"criteria", set.criteria}};
    return sha256_hex(canonical.dump());
}

void check_criteria_id(const std::string& id) {
    if (id.empty() || id.front() == '.') throw ValidationError("criteria id must be non-empty and not start with '.'");
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) throw ValidationError("criteria id \"" + id + "\" has a character outside [A-Za-z0-9_.-]");
    }
}

json to_json(const StoredCriteria& s) {
    json j = s.set;
    j["version"] = s.version;
    j["content_hash"] = s.content_hash;
    return j;
}

StoredCriteria stored_criteria_from_json(const json& j) {
    StoredCriteria s;
    s.set = criteria_set_from_json(j);
    s.version = static_cast<int>(require_count(j, "version"));
    s.content_hash = require_string(j, "content_hash");
    return s;
}

CriteriaStore::CriteriaStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create criteria directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path CriteriaStore::path_for(const std::string& id) const { return dir_ / (id + ".json"); }

StoredCriteria CriteriaStore::save(const CriteriaSet& set) {
    check_criteria_id(set.id);
    for (std::size_t i = 0; i < set.criteria.size(); ++i) {
        if (set.criteria[i].find_first_not_of(" \t\r\n") == std::string::npos) {
            throw ValidationError("criterion " + std::to_string(i + 1) + " is blank");
        }
    }
    std::lock_guard lock(mu_);
    StoredCriteria stored{set, 1, criteria_content_hash(set)};
    const auto path = path_for(set.id);
    if (std::filesystem::exists(path)) {
        auto existing = stored_criteria_from_json(read_json_file(path));
        if (existing.content_hash == stored.content_hash) return existing;
        throw ConflictError("criteria set \"" + set.id + "\" already exists with different content (stored hash " +
                            existing.content_hash + ")");
    }
    const auto tmp = path.string() + ".tmp";
    write_json_file(to_json(stored), tmp);
    std::filesystem::rename(tmp, path);
    return stored;
}

std::optional<StoredCriteria> CriteriaStore::get(const std::string& id) const {
    check_criteria_id(id);
    std::lock_guard lock(mu_);
    const auto path = path_for(id);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return stored_criteria_from_json(read_json_file(path));
}

std::vector<StoredCriteria> CriteriaStore::list() const {
    std::lock_guard lock(mu_);
    std::vector<StoredCriteria> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() != ".json") continue;
        out.push_back(stored_criteria_from_json(read_json_file(entry.path())));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.set.id < b.set.id; });
    return out;
}

}  // namespace sysfb
