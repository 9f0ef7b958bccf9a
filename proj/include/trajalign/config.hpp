#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajalign/alignment.hpp"
#include "trajalign/metrics.hpp"
#include "trajalign/serialization.hpp"

namespace trajalign {

struct JudgeEndpointConfig {
    std::string id;
    std::string url;  ///< "http://..." or "mock:<fixture path>"
};

/// Everything a run depends on. Embedded in every report.
struct RunConfig {
    AlignmentConfig alignment;
    std::string encoder = "builtin";
    std::optional<std::string> policy_path;
    SerializationPolicy policy;
    MetricWeights weights = uniform_weights();
    std::vector<JudgeEndpointConfig> judges;
    std::size_t jobs = 1;
    bool strict = false;

    /// Throws ConfigError on invalid thresholds, weights or job count.
    void validate() const;
};

inline constexpr const char* kConfigEnvVar = "TRAJALIGN_CONFIG";

/// Apply a config document on top of `base`. Unknown keys are rejected.
/// Relative policy paths resolve against `base_dir`.
RunConfig apply_config(RunConfig base, const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Defaults, overlaid by the file named in TRAJALIGN_CONFIG when set.
RunConfig load_run_config();
RunConfig load_run_config_file(const std::filesystem::path& path, RunConfig base = {});

/// "a,b,c,..." with exactly eight numbers, in leaderboard order.
MetricWeights parse_weights(const std::string& text);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace trajalign
