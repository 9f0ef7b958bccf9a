#include "trajalign/serialization.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <utility>

#include "trajalign/errors.hpp"

namespace trajalign {

namespace {

constexpr std::string_view kValueReserved = "|=,[]{}\"\\";
constexpr std::string_view kKeyReserved = ".|=,[]{}\"\\";

bool has_any(std::string_view s, std::string_view chars) {
    return s.find_first_of(chars) != std::string_view::npos;
}

bool has_control_or_edge_space(std::string_view s) {
    if (!s.empty() && (s.front() == ' ' || s.back() == ' ')) {
        return true;
    }
    return std::any_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x20; });
}

/// A verbatim string would be confused with a number, boolean or null.
bool reads_as_other_scalar(const std::string& s) {
    if (s == "true" || s == "false" || s == "null") {
        return true;
    }
    auto j = nlohmann::json::parse(s, nullptr, false);
    return !j.is_discarded() && j.is_number();
}

std::string render_string(const std::string& s) {
    if (s.empty() || has_any(s, kValueReserved) || has_control_or_edge_space(s) || reads_as_other_scalar(s)) {
        return nlohmann::json(s).dump();
    }
    return s;
}

std::string render_key(const std::string& k) {
    if (k.empty() || has_any(k, kKeyReserved) || has_control_or_edge_space(k)) {
        return nlohmann::json(k).dump();
    }
    return k;
}

std::string render_float(double v, const SerializationPolicy& p) {
    if (!std::isfinite(v)) {
        throw NonSerializableError("non-finite number in arguments");
    }
    char buf[64];
    std::to_chars_result r;
    if (p.float_decimals) {
        r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, *p.float_decimals);
    } else {
        r = std::to_chars(buf, buf + sizeof buf, v);
    }
    return std::string(buf, r.ptr);
}

class Renderer {
public:
    explicit Renderer(const SerializationPolicy& p) : policy_(p) {
        for (const auto& path : p.set_typed_paths) {
            std::vector<std::string> segs;
            std::size_t start = 0;
            while (true) {
                auto dot = path.find('.', start);
                segs.push_back(path.substr(start, dot - start));
                if (dot == std::string::npos) {
                    break;
                }
                start = dot + 1;
            }
            set_paths_.push_back(std::move(segs));
        }
    }

    void walk(const nlohmann::json& node, std::vector<std::string>& path, int depth,
              std::vector<std::pair<std::string, std::string>>& leaves) const {
        for (const auto& [key, child] : node.items()) {
            path.push_back(key);
            if (child.is_object() && !child.empty()) {
                check_depth(depth + 1);
                walk(child, path, depth + 1, leaves);
            } else {
                bool as_set = child.is_array() && is_set_path(path);
                leaves.emplace_back(render_path(path), value(child, depth + 1, as_set));
            }
            path.pop_back();
        }
    }

private:
    void check_depth(int depth) const {
        if (depth > policy_.max_depth) {
            throw DepthError("argument nesting depth " + std::to_string(depth) + " exceeds max_depth " +
                             std::to_string(policy_.max_depth));
        }
    }

    bool is_set_path(const std::vector<std::string>& path) const {
        return std::find(set_paths_.begin(), set_paths_.end(), path) != set_paths_.end();
    }

    static std::string render_path(const std::vector<std::string>& path) {
        std::string out;
        for (std::size_t i = 0; i < path.size(); ++i) {
            if (i) {
                out += '.';
            }
            out += render_key(path[i]);
        }
        return out;
    }

    /// `depth` is the depth a container at this position would occupy.
    std::string value(const nlohmann::json& v, int depth, bool as_set) const {
        using vt = nlohmann::json::value_t;
        switch (v.type()) {
        case vt::null:
            return "null";
        case vt::boolean:
            return v.get<bool>() ? "true" : "false";
        case vt::number_integer:
            return std::to_string(v.get<std::int64_t>());
        case vt::number_unsigned:
            return std::to_string(v.get<std::uint64_t>());
        case vt::number_float:
            return render_float(v.get<double>(), policy_);
        case vt::string:
            return render_string(v.get<std::string>());
        case vt::array: {
            check_depth(depth);
            std::vector<std::string> items;
            items.reserve(v.size());
            for (const auto& e : v) {
                items.push_back(value(e, depth + 1, false));
            }
            if (as_set) {
                std::sort(items.begin(), items.end());
            }
            std::string out = "[";
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (i) {
                    out += ',';
                }
                out += items[i];
            }
            return out + "]";
        }
        case vt::object: {
            check_depth(depth);
            std::vector<std::string> items;
            for (const auto& [k, e] : v.items()) {
                items.push_back(render_key(k) + "=" + value(e, depth + 1, false));
            }
            std::sort(items.begin(), items.end());
            std::string out = "{";
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (i) {
                    out += ',';
                }
                out += items[i];
            }
            return out + "}";
        }
        default:
            throw NonSerializableError("argument value of unsupported type '" + std::string(v.type_name()) + "'");
        }
    }

    const SerializationPolicy& policy_;
    std::vector<std::vector<std::string>> set_paths_;
};

}  // namespace

void SerializationPolicy::validate() const {
    if (max_depth < 1) {
        throw PolicyError("max_depth must be >= 1");
    }
    if (float_decimals && (*float_decimals < 0 || *float_decimals > 17)) {
        throw PolicyError("float_decimals must lie in [0, 17]");
    }
    for (const auto& path : set_typed_paths) {
        bool bad = path.empty() || path.front() == '.' || path.back() == '.' ||
                   path.find("..") != std::string::npos ||
                   has_any(path, "|=,[]{}\"\\") || has_control_or_edge_space(path);
        if (bad) {
            throw PolicyError("malformed set-typed path '" + path + "'");
        }
    }
}

SerializationPolicy policy_from_json(const nlohmann::json& j) {
    SerializationPolicy p;
    if (!j.is_object()) {
        throw PolicyError("serialization policy must be an object");
    }
    try {
        if (j.contains("set_typed_paths")) {
            p.set_typed_paths = j.at("set_typed_paths").get<std::vector<std::string>>();
        }
        if (j.contains("float_decimals") && !j.at("float_decimals").is_null()) {
            p.float_decimals = j.at("float_decimals").get<int>();
        }
        if (j.contains("max_depth")) {
            p.max_depth = j.at("max_depth").get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw PolicyError(std::string("serialization policy: ") + e.what());
    }
    p.validate();
    return p;
}

nlohmann::json to_json(const SerializationPolicy& p) {
    nlohmann::json j;
    j["set_typed_paths"] = p.set_typed_paths;
    j["float_decimals"] = p.float_decimals ? nlohmann::json(*p.float_decimals) : nlohmann::json(nullptr);
    j["max_depth"] = p.max_depth;
    return j;
}

std::string serialize_call(const ToolCall& call, const SerializationPolicy& policy) {
    if (!call.arguments.is_object()) {
        throw NonSerializableError("arguments root must be a mapping");
    }
    Renderer renderer(policy);
    std::vector<std::pair<std::string, std::string>> leaves;
    std::vector<std::string> path;
    renderer.walk(call.arguments, path, 1, leaves);
    std::sort(leaves.begin(), leaves.end());

    std::string out = "tool=" + call.tool;
    for (const auto& [k, v] : leaves) {
        out += " | ";
        out += k;
        out += '=';
        out += v;
    }
    return out;
}

}  // namespace trajalign
