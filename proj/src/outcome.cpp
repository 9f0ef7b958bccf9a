#include "trajalign/outcome.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "trajalign/errors.hpp"
#include "trajalign/trajectory.hpp"

namespace trajalign {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> string_list(const nlohmann::json& v, const std::string& where) {
    if (!v.is_array()) {
        throw SchemaError(where + ": expected a list of strings");
    }
    std::vector<std::string> out;
    for (const auto& s : v) {
        if (!s.is_string()) {
            throw SchemaError(where + ": expected a list of strings");
        }
        out.push_back(s.get<std::string>());
    }
    return out;
}

}  // namespace

std::string_view outcome_name(Outcome o) {
    switch (o) {
        case Outcome::IllegalFormat:
            return "illegal_format";
        case Outcome::UnknownTool:
            return "unknown_tool";
        case Outcome::InvalidArguments:
            return "invalid_arguments";
        case Outcome::SuccessResourceNotFound:
            return "success_resource_not_found";
        case Outcome::Success:
            return "success";
    }
    return "unknown";
}

ToolRegistry::ToolRegistry(std::vector<std::string> tools,
                           std::map<std::string, std::vector<std::string>> tool_patterns,
                           std::vector<std::string> default_patterns)
    : tools_(std::move(tools)), tool_patterns_(std::move(tool_patterns)), default_patterns_(std::move(default_patterns)) {
    if (tools_.empty()) {
        throw ConfigError("tool registry is empty");
    }
    for (const auto& t : tools_) {
        if (!is_qualified_tool_name(t)) {
            throw ConfigError("registry tool '" + t + "' is not a qualified server/tool name");
        }
    }
    std::sort(tools_.begin(), tools_.end());
    tools_.erase(std::unique(tools_.begin(), tools_.end()), tools_.end());
    for (auto& p : default_patterns_) {
        p = lower(p);
    }
    for (auto& [tool, pats] : tool_patterns_) {
        for (auto& p : pats) {
            p = lower(p);
        }
    }
}

bool ToolRegistry::contains(const std::string& tool) const {
    return std::binary_search(tools_.begin(), tools_.end(), tool);
}

const std::vector<std::string>& ToolRegistry::patterns_for(const std::string& tool) const {
    auto it = tool_patterns_.find(tool);
    return it == tool_patterns_.end() ? default_patterns_ : it->second;
}

ToolRegistry parse_registry(const nlohmann::json& doc) {
    const nlohmann::json* items = &doc;
    std::vector<std::string> defaults{std::string(ToolRegistry::kDefaultPattern)};
    if (doc.is_object()) {
        if (!doc.contains("tools")) {
            throw SchemaError("registry object needs a \"tools\" list");
        }
        items = &doc["tools"];
        if (doc.contains("default_error_patterns")) {
            defaults = string_list(doc["default_error_patterns"], "/default_error_patterns");
        }
    }
    if (!items->is_array()) {
        throw SchemaError("registry must be a JSON list");
    }
    std::vector<std::string> tools;
    std::map<std::string, std::vector<std::string>> patterns;
    std::size_t i = 0;
    for (const auto& item : *items) {
        const std::string where = "/" + std::to_string(i++);
        if (item.is_string()) {
            tools.push_back(item.get<std::string>());
        } else if (item.is_object() && item.contains("name") && item["name"].is_string()) {
            const auto name = item["name"].get<std::string>();
            tools.push_back(name);
            if (item.contains("error_patterns")) {
                patterns[name] = string_list(item["error_patterns"], where + "/error_patterns");
            }
        } else {
            throw SchemaError(where + ": expected a tool name or {\"name\", \"error_patterns\"}");
        }
    }
    return ToolRegistry(std::move(tools), std::move(patterns), std::move(defaults));
}

ToolRegistry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open registry " + path.string());
    }
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw SchemaError(path.string() + ": registry is not valid JSON");
    }
    return with_context(path.string() + ": ", [&] { return parse_registry(doc); });
}

Outcome classify_call(const CallLogEntry& e, const ToolRegistry& registry) {
    if (!e.parsed_name || e.parsed_name->empty() || !e.parsed_args || !e.parsed_args->is_object()) {
        return Outcome::IllegalFormat;
    }
    if (!registry.contains(*e.parsed_name)) {
        return Outcome::UnknownTool;
    }
    if (e.transport_status == 400) {
        return Outcome::InvalidArguments;
    }
    if (e.tool_error_text) {
        const std::string text = lower(*e.tool_error_text);
        for (const auto& p : registry.patterns_for(*e.parsed_name)) {
            if (!p.empty() && text.find(p) != std::string::npos) {
                return Outcome::InvalidArguments;
            }
        }
    }
    if (e.transport_status == 404) {
        return Outcome::SuccessResourceNotFound;
    }
    return Outcome::Success;
}

OutcomeDistribution outcome_distribution(const std::vector<CallLogEntry>& entries, const ToolRegistry& registry) {
    if (entries.empty()) {
        throw EmptyLogError("call log has no entries");
    }
    OutcomeDistribution d;
    for (const auto& e : entries) {
        ++d.counts[static_cast<std::size_t>(classify_call(e, registry))];
    }
    d.total = entries.size();
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        d.fractions[k] = static_cast<double>(d.counts[k]) / static_cast<double>(d.total);
    }
    return d;
}

CallLogEntry parse_log_entry(const nlohmann::json& record) {
    if (!record.is_object()) {
        throw SchemaError("log record must be a JSON object");
    }
    CallLogEntry e;
    if (record.contains("raw_request")) {
        const auto& raw = record["raw_request"];
        e.raw_request = raw.is_string() ? raw.get<std::string>() : raw.dump();
    }
    if (record.contains("parsed_name") && !record["parsed_name"].is_null()) {
        if (!record["parsed_name"].is_string()) {
            throw SchemaError("/parsed_name: expected a string");
        }
        e.parsed_name = record["parsed_name"].get<std::string>();
    }
    if (record.contains("parsed_args") && !record["parsed_args"].is_null()) {
        e.parsed_args = record["parsed_args"];
    }
    if (record.contains("transport_status") && !record["transport_status"].is_null()) {
        if (!record["transport_status"].is_number_integer()) {
            throw SchemaError("/transport_status: expected an integer");
        }
        e.transport_status = record["transport_status"].get<int>();
    }
    if (record.contains("tool_error_text") && !record["tool_error_text"].is_null()) {
        if (!record["tool_error_text"].is_string()) {
            throw SchemaError("/tool_error_text: expected a string");
        }
        e.tool_error_text = record["tool_error_text"].get<std::string>();
    }

    if (!e.parsed_name && !e.parsed_args) {
        auto req = nlohmann::json::parse(e.raw_request, nullptr, false);
        if (!req.is_discarded() && req.is_object()) {
            if (req.contains("name") && req["name"].is_string()) {
                e.parsed_name = req["name"].get<std::string>();
            }
            if (req.contains("arguments")) {
                nlohmann::json args = req["arguments"];
                if (args.is_string()) {
                    // arguments sent as an encoded JSON string
                    args = nlohmann::json::parse(args.get<std::string>(), nullptr, false);
                }
                if (!args.is_discarded()) {
                    e.parsed_args = std::move(args);
                }
            }
        }
    }
    return e;
}

std::vector<CallLogEntry> load_call_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open call log " + path.string());
    }
    std::vector<CallLogEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        auto record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            throw SchemaError(where + "not valid JSON");
        }
        out.push_back(with_context(where, [&] { return parse_log_entry(record); }));
    }
    return out;
}

}  // namespace trajalign
