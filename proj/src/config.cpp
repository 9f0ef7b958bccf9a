#include "trajalign/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

#include "trajalign/errors.hpp"

namespace trajalign {

namespace {

double number_at(const nlohmann::json& doc, const char* key) {
    if (!doc[key].is_number()) {
        throw ConfigError(std::string("config key '") + key + "' must be a number");
    }
    return doc[key].get<double>();
}

SerializationPolicy load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open serialization policy " + path.string());
    }
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw ConfigError(path.string() + ": policy is not valid JSON");
    }
    return with_context(path.string() + ": ", [&] { return policy_from_json(doc); });
}

}  // namespace

void RunConfig::validate() const {
    alignment.validate();
    validate_weights(weights);
    policy.validate();
    if (jobs == 0) {
        throw ConfigError("jobs must be at least 1");
    }
    std::set<std::string> ids;
    for (const auto& j : judges) {
        if (j.id.empty() || j.url.empty()) {
            throw ConfigError("judge endpoints need an id and a url");
        }
        if (!ids.insert(j.id).second) {
            throw ConfigError("duplicate judge id '" + j.id + "'");
        }
    }
}

RunConfig apply_config(RunConfig cfg, const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    static const std::set<std::string> known = {"tau_weak", "tau_strong", "lambda_pen", "encoder", "policy",
                                                "policy_path", "weights", "judges", "jobs", "strict"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    if (doc.contains("tau_weak")) {
        cfg.alignment.tau_weak = number_at(doc, "tau_weak");
    }
    if (doc.contains("tau_strong")) {
        cfg.alignment.tau_strong = number_at(doc, "tau_strong");
    }
    if (doc.contains("lambda_pen")) {
        cfg.alignment.lambda_pen = number_at(doc, "lambda_pen");
    }
    if (doc.contains("encoder")) {
        if (!doc["encoder"].is_string()) {
            throw ConfigError("config key 'encoder' must be a string");
        }
        cfg.encoder = doc["encoder"].get<std::string>();
    }
    if (doc.contains("policy")) {
        cfg.policy = policy_from_json(doc["policy"]);
        cfg.policy_path.reset();
    }
    if (doc.contains("policy_path")) {
        if (!doc["policy_path"].is_string()) {
            throw ConfigError("config key 'policy_path' must be a string");
        }
        std::filesystem::path p = doc["policy_path"].get<std::string>();
        if (p.is_relative() && !base_dir.empty()) {
            p = base_dir / p;
        }
        cfg.policy = load_policy(p);
        cfg.policy_path = p.string();
    }
    if (doc.contains("weights")) {
        const auto& w = doc["weights"];
        if (w.is_array()) {
            if (w.size() != kMetricCount) {
                throw ConfigError("config 'weights' needs " + std::to_string(kMetricCount) + " numbers");
            }
            for (std::size_t i = 0; i < kMetricCount; ++i) {
                if (!w[i].is_number()) {
                    throw ConfigError("config 'weights' must hold numbers");
                }
                cfg.weights[i] = w[i].get<double>();
            }
        } else if (w.is_object()) {
            MetricWeights out{};
            for (const auto& [key, value] : w.items()) {
                std::size_t i = 0;
                while (i < kMetricCount && key != kMetricNames[i]) {
                    ++i;
                }
                if (i == kMetricCount || !value.is_number()) {
                    throw ConfigError("bad weights entry '" + key + "'");
                }
                out[i] = value.get<double>();
            }
            cfg.weights = out;
        } else {
            throw ConfigError("config 'weights' must be a list or an object keyed by metric");
        }
    }
    if (doc.contains("judges")) {
        if (!doc["judges"].is_array()) {
            throw ConfigError("config 'judges' must be a list");
        }
        cfg.judges.clear();
        for (const auto& j : doc["judges"]) {
            if (!j.is_object() || !j.contains("id") || !j.contains("url") || !j["id"].is_string() ||
                !j["url"].is_string()) {
                throw ConfigError("each judge needs string 'id' and 'url'");
            }
            cfg.judges.push_back({j["id"].get<std::string>(), j["url"].get<std::string>()});
        }
    }
    if (doc.contains("jobs")) {
        if (!doc["jobs"].is_number_integer() || doc["jobs"].get<long long>() < 1) {
            throw ConfigError("config key 'jobs' must be a positive integer");
        }
        cfg.jobs = doc["jobs"].get<std::size_t>();
    }
    if (doc.contains("strict")) {
        if (!doc["strict"].is_boolean()) {
            throw ConfigError("config key 'strict' must be a boolean");
        }
        cfg.strict = doc["strict"].get<bool>();
    }
    return cfg;
}

RunConfig load_run_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw ConfigError(path.string() + ": config is not valid JSON");
    }
    return with_context(path.string() + ": ", [&] { return apply_config(std::move(base), doc, path.parent_path()); });
}

RunConfig load_run_config() {
    const char* env = std::getenv(kConfigEnvVar);
    if (env == nullptr || *env == '\0') {
        return {};
    }
    return load_run_config_file(env);
}

MetricWeights parse_weights(const std::string& text) {
    MetricWeights w{};
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) {
            comma = text.size();
        }
        std::string item = text.substr(pos, comma - pos);
        const auto first = item.find_first_not_of(' ');
        const auto last = item.find_last_not_of(' ');
        item = first == std::string::npos ? "" : item.substr(first, last - first + 1);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            throw ConfigError("bad weight '" + item + "' in --weights");
        }
        if (count == kMetricCount) {
            throw ConfigError("--weights takes exactly " + std::to_string(kMetricCount) + " numbers");
        }
        w[count++] = v;
        pos = comma + 1;
    }
    if (count != kMetricCount) {
        throw ConfigError("--weights takes exactly " + std::to_string(kMetricCount) + " numbers, got " +
                          std::to_string(count));
    }
    return w;
}

nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json weights = nlohmann::json::object();
    for (std::size_t i = 0; i < kMetricCount; ++i) {
        weights[kMetricNames[i]] = cfg.weights[i];
    }
    nlohmann::json judges = nlohmann::json::array();
    for (const auto& j : cfg.judges) {
        judges.push_back({{"id", j.id}, {"url", j.url}});
    }
    return {
        {"alignment", to_json(cfg.alignment)},
        {"encoder", cfg.encoder},
        {"policy", to_json(cfg.policy)},
        {"policy_path", cfg.policy_path ? nlohmann::json(*cfg.policy_path) : nlohmann::json(nullptr)},
        {"weights", weights},
        {"judges", judges},
        {"jobs", cfg.jobs},
        {"strict", cfg.strict},
    };
}

}  // namespace trajalign
