#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace trajalign {

/// One replayed tool call as observed in a call log.
struct CallLogEntry {
    std::string raw_request;
    std::optional<std::string> parsed_name;
    std::optional<nlohmann::json> parsed_args;
    std::optional<int> transport_status;
    std::optional<std::string> tool_error_text;
};

enum class Outcome {
    IllegalFormat = 0,
    UnknownTool,
    InvalidArguments,
    SuccessResourceNotFound,
    Success,
};
inline constexpr std::size_t kOutcomeCount = 5;

/// "illegal_format", "unknown_tool", "invalid_arguments",
/// "success_resource_not_found", "success".
std::string_view outcome_name(Outcome o);

/// Exposed tools plus the error-text patterns that mark invalid arguments.
/// Patterns match as case-insensitive substrings.
class ToolRegistry {
public:
    static constexpr std::string_view kDefaultPattern = "invalid argument";

    /// Throws ConfigError when `tools` is empty or a name is not qualified.
    explicit ToolRegistry(std::vector<std::string> tools,
                          std::map<std::string, std::vector<std::string>> tool_patterns = {},
                          std::vector<std::string> default_patterns = {std::string(kDefaultPattern)});

    bool contains(const std::string& tool) const;
    /// Patterns that apply to `tool`: its own list if it has one, else the defaults.
    const std::vector<std::string>& patterns_for(const std::string& tool) const;
    const std::vector<std::string>& tools() const { return tools_; }

private:
    std::vector<std::string> tools_;
    std::map<std::string, std::vector<std::string>> tool_patterns_;
    std::vector<std::string> default_patterns_;
};

/// Registry file: a JSON list whose items are qualified names or
/// `{"name": ..., "error_patterns": [...]}` objects. An object form
/// `{"tools": [...], "default_error_patterns": [...]}` is accepted too.
ToolRegistry parse_registry(const nlohmann::json& doc);
ToolRegistry load_registry(const std::filesystem::path& path);

/// First matching rule wins: illegal format, unknown tool, invalid
/// arguments (status 400 or a pattern hit), resource not found (404),
/// success.
Outcome classify_call(const CallLogEntry& entry, const ToolRegistry& registry);

struct OutcomeDistribution {
    std::array<std::size_t, kOutcomeCount> counts{};
    std::array<double, kOutcomeCount> fractions{};
    std::size_t total = 0;
};

/// Throws EmptyLogError on an empty log.
OutcomeDistribution outcome_distribution(const std::vector<CallLogEntry>& entries, const ToolRegistry& registry);

/// Entry from one log record. Missing parsed fields are recovered from
/// raw_request when it is a JSON object with "name" and "arguments".
CallLogEntry parse_log_entry(const nlohmann::json& record);
/// JSON lines; blank lines are skipped. SchemaError carries the line number.
std::vector<CallLogEntry> load_call_log(const std::filesystem::path& path);

}  // namespace trajalign
