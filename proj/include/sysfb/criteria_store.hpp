#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sysfb/data_model.hpp"

namespace sysfb {

struct StoredCriteria {
    CriteriaSet set;
    int version = 1;
    std::string content_hash;
};

/// Hash over target kind, label and the ordered criteria texts.
std::string criteria_content_hash(const CriteriaSet& set);

/// A directory of "<id>.json" files, one per criteria set. Saving the same
/// content again is a no-op; different content under an existing id throws
/// ConflictError. Writes are serialized.
class CriteriaStore {
public:
    explicit CriteriaStore(std::filesystem::path dir);

    StoredCriteria save(const CriteriaSet& set);
    std::optional<StoredCriteria> get(const std::string& id) const;
    /// Sorted by id.
    std::vector<StoredCriteria> list() const;
    const std::filesystem::path& directory() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& id) const;

    std::filesystem::path dir_;
    mutable std::mutex mu_;
};

/// Ids may use letters, digits, '_', '-' and '.', and must not start with '.'.
void check_criteria_id(const std::string& id);

json to_json(const StoredCriteria& s);
StoredCriteria stored_criteria_from_json(const json& j);

}  // namespace sysfb
