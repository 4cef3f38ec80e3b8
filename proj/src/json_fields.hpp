#pragma once

#include <optional>
#include <string>

#include "sysfb/data_model.hpp"
#include "sysfb/errors.hpp"

// Strict field accessors shared by the JSON parsers. Each failure names the field.
namespace sysfb::detail {

inline const json& require(const json& j, const char* field) {
    if (!j.is_object()) throw ValidationError("expected a JSON object");
    auto it = j.find(field);
    if (it == j.end()) throw ValidationError(std::string("missing required field \"") + field + "\"");
    return *it;
}

inline std::string require_string(const json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_string()) throw ValidationError(std::string("field \"") + field + "\" must be a string");
    return v.get<std::string>();
}

inline bool require_bool(const json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_boolean()) throw ValidationError(std::string("field \"") + field + "\" must be a boolean");
    return v.get<bool>();
}

inline double require_number(const json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_number()) throw ValidationError(std::string("field \"") + field + "\" must be a number");
    return v.get<double>();
}

inline const json& require_array(const json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_array()) throw ValidationError(std::string("field \"") + field + "\" must be an array");
    return v;
}

inline std::optional<std::string> optional_string(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(std::string("field \"") + field + "\" must be a string or null");
    return it->get<std::string>();
}

inline std::size_t require_count(const json& j, const char* field) {
    const auto& v = require(j, field);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ValidationError(std::string("field \"") + field + "\" must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace sysfb::detail
