#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "sysfb/data_model.hpp"
#include "sysfb/http.hpp"

namespace sysfb {

/// Parses the TOML subset used by run configs into a JSON object: comments,
/// [table] and [dotted.table] headers, bare or quoted keys, basic and literal
/// strings, integers, floats, booleans and (possibly multi-line) arrays.
/// "${NAME}" inside strings is replaced by the environment variable NAME.
/// Errors are ConfigError with the line number.
json parse_toml(std::string_view text);

struct EndpointConfig {
    std::string url;
    std::string model = "default";
    std::string api_key;
    double requests_per_second = 0.0;
};

struct RunConfig {
    std::filesystem::path config_path;
    std::filesystem::path run_dir;

    EndpointConfig refiner;
    EndpointConfig judge;
    EndpointConfig checker;
    EndpointConfig embedder;
    EndpointConfig feedback;  // defaults to the refiner
    EndpointConfig search;    // optional
    EndpointConfig grammar;   // defaults to builtin

    std::optional<std::filesystem::path> frequency_table;
    double C = 100000.0;
    std::size_t k_query = 5;
    std::size_t k_response = 10;
    std::uint64_t cluster_seed = 0;
    std::uint64_t sample_seed = 0;
    std::size_t parallelism = 4;
    double target_precision = 0.8;
    std::size_t n_representatives = 3;
    std::size_t n_top_terms = 5;
    RetryPolicy retry{};

    std::size_t k_for(TargetKind kind) const { return kind == TargetKind::query ? k_query : k_response; }
};

/// Reads and validates a config file. Relative paths resolve against the
/// file's directory; the run directory defaults to that directory.
RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_toml(const json& doc, const std::filesystem::path& config_path);
/// Throws ConfigError on any invariant violation.
void validate(const RunConfig& config);

}  // namespace sysfb
