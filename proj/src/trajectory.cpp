#include "trajalign/trajectory.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "trajalign/errors.hpp"

namespace trajalign {

namespace {

std::string ref_str(const CallRef& r) {
    std::ostringstream os;
    os << "(" << r.step << "," << r.slot << ")";
    return os.str();
}

std::string pointer(std::initializer_list<std::string> parts) {
    std::string out;
    for (const auto& p : parts) {
        out += '/';
        out += p;
    }
    return out;
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(path + ": missing field '" + key + "'");
    }
    return *it;
}

std::size_t as_index(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number_integer()) {
        throw SchemaError(path + ": expected a non-negative integer");
    }
    if (v.is_number_unsigned()) {
        return v.get<std::size_t>();
    }
    auto i = v.get<long long>();
    if (i < 0) {
        throw SchemaError(path + ": expected a non-negative integer");
    }
    return static_cast<std::size_t>(i);
}

CallRef parse_ref(const nlohmann::json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) {
        throw SchemaError(path + ": expected [step, slot]");
    }
    return {as_index(v[0], path + "/0"), as_index(v[1], path + "/1")};
}

}  // namespace

bool is_qualified_tool_name(const std::string& name) {
    auto slash = name.find('/');
    if (slash == std::string::npos || name.find('/', slash + 1) != std::string::npos) {
        return false;
    }
    return slash > 0 && slash + 1 < name.size();
}

Trajectory::Trajectory(std::vector<Step> steps,
                       std::vector<DependencyEdge> deps,
                       std::map<std::string, std::string> meta)
    : steps_(std::move(steps)), deps_(std::move(deps)), meta_(std::move(meta)) {
    for (std::size_t s = 0; s < steps_.size(); ++s) {
        const Step& st = steps_[s];
        const std::string where = pointer({"steps", std::to_string(s)});
        if (st.index != s) {
            throw InvariantError(where + "/index: non-contiguous steps (expected " + std::to_string(s) +
                                 ", got " + std::to_string(st.index) + ")");
        }
        if (st.calls.empty()) {
            throw InvariantError(where + "/calls: step has no calls");
        }
        std::set<std::size_t> slots;
        for (std::size_t c = 0; c < st.calls.size(); ++c) {
            const ToolCall& call = st.calls[c];
            const std::string cw = where + pointer({"calls", std::to_string(c)});
            if (!is_qualified_tool_name(call.tool)) {
                throw InvariantError(cw + "/tool: '" + call.tool + "' is not of the form server/tool");
            }
            if (!call.arguments.is_object()) {
                throw InvariantError(cw + "/arguments: root must be a mapping");
            }
            if (call.step_index != s) {
                throw InvariantError(cw + ": step_index " + std::to_string(call.step_index) +
                                     " does not match step " + std::to_string(s));
            }
            if (!slots.insert(call.slot_index).second) {
                throw InvariantError(cw + ": duplicate slot " + std::to_string(call.slot_index));
            }
        }
    }

    auto exists = [this](const CallRef& r) {
        if (r.step >= steps_.size()) {
            return false;
        }
        const auto& calls = steps_[r.step].calls;
        return std::any_of(calls.begin(), calls.end(),
                           [&](const ToolCall& c) { return c.slot_index == r.slot; });
    };
    for (std::size_t e = 0; e < deps_.size(); ++e) {
        const auto& edge = deps_[e];
        const std::string where = pointer({"deps", std::to_string(e)});
        if (!exists(edge.from) || !exists(edge.to)) {
            throw InvariantError(where + ": edge " + ref_str(edge.from) + "->" + ref_str(edge.to) +
                                 " references a missing call");
        }
        if (edge.from.step == edge.to.step) {
            throw InvariantError(where + ": intra-step edge " + ref_str(edge.from) + "->" +
                                 ref_str(edge.to) + " is not allowed");
        }
        if (edge.from.step > edge.to.step) {
            throw InvariantError(where + ": edge " + ref_str(edge.from) + "->" + ref_str(edge.to) +
                                 " points backwards in time");
        }
    }

    for (auto& st : steps_) {
        std::sort(st.calls.begin(), st.calls.end(),
                  [](const ToolCall& a, const ToolCall& b) { return a.slot_index < b.slot_index; });
        flat_.insert(flat_.end(), st.calls.begin(), st.calls.end());
    }
}

const Step& Trajectory::step(std::size_t index) const {
    if (index >= steps_.size()) {
        throw IndexError("step " + std::to_string(index) + " out of range (L=" +
                         std::to_string(steps_.size()) + ")");
    }
    return steps_[index];
}

Trajectory parse_trajectory(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw SchemaError("/: trajectory document must be an object");
    }

    std::map<std::string, std::string> meta;
    if (auto it = doc.find("meta"); it != doc.end() && !it->is_null()) {
        if (!it->is_object()) {
            throw SchemaError("/meta: expected an object");
        }
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) {
                throw SchemaError("/meta/" + k + ": expected a string");
            }
            meta.emplace(k, v.get<std::string>());
        }
    }

    const auto& jsteps = require(doc, "steps", "/");
    if (!jsteps.is_array()) {
        throw SchemaError("/steps: expected an array");
    }
    std::vector<Step> steps;
    steps.reserve(jsteps.size());
    for (std::size_t s = 0; s < jsteps.size(); ++s) {
        const auto& js = jsteps[s];
        const std::string where = pointer({"steps", std::to_string(s)});
        if (!js.is_object()) {
            throw SchemaError(where + ": expected an object");
        }
        Step st;
        st.index = as_index(require(js, "index", where), where + "/index");
        const auto& jcalls = require(js, "calls", where);
        if (!jcalls.is_array()) {
            throw SchemaError(where + "/calls: expected an array");
        }
        for (std::size_t c = 0; c < jcalls.size(); ++c) {
            const auto& jc = jcalls[c];
            const std::string cw = where + pointer({"calls", std::to_string(c)});
            if (!jc.is_object()) {
                throw SchemaError(cw + ": expected an object");
            }
            const auto& tool = require(jc, "tool", cw);
            if (!tool.is_string()) {
                throw SchemaError(cw + "/tool: expected a string");
            }
            const auto& args = require(jc, "arguments", cw);
            if (!args.is_object()) {
                throw SchemaError(cw + "/arguments: expected an object");
            }
            st.calls.push_back(ToolCall{tool.get<std::string>(), args, st.index, c});
        }
        steps.push_back(std::move(st));
    }

    std::vector<DependencyEdge> deps;
    if (auto it = doc.find("deps"); it != doc.end() && !it->is_null()) {
        if (!it->is_array()) {
            throw SchemaError("/deps: expected an array");
        }
        for (std::size_t e = 0; e < it->size(); ++e) {
            const auto& je = (*it)[e];
            const std::string where = pointer({"deps", std::to_string(e)});
            if (!je.is_array() || je.size() != 2) {
                throw SchemaError(where + ": expected [[i,a],[j,b]]");
            }
            deps.push_back({parse_ref(je[0], where + "/0"), parse_ref(je[1], where + "/1")});
        }
    }

    return Trajectory(std::move(steps), std::move(deps), std::move(meta));
}

nlohmann::json emit_trajectory(const Trajectory& t) {
    nlohmann::json doc;
    doc["meta"] = nlohmann::json::object();
    for (const auto& [k, v] : t.meta()) {
        doc["meta"][k] = v;
    }
    doc["steps"] = nlohmann::json::array();
    for (const auto& st : t.steps()) {
        nlohmann::json calls = nlohmann::json::array();
        for (const auto& c : st.calls) {
            calls.push_back({{"tool", c.tool}, {"arguments", c.arguments}});
        }
        doc["steps"].push_back({{"index", st.index}, {"calls", std::move(calls)}});
    }
    if (!t.deps().empty()) {
        doc["deps"] = nlohmann::json::array();
        for (const auto& e : t.deps()) {
            doc["deps"].push_back({{e.from.step, e.from.slot}, {e.to.step, e.to.slot}});
        }
    }
    return doc;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    try {
        return parse_trajectory(doc);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    } catch (const InvariantError& e) {
        throw InvariantError(path.string() + ": " + e.what());
    }
}

bool is_multi_hop(const Trajectory& t) {
    if (t.step_count() < 2) {
        return false;
    }
    return std::any_of(t.deps().begin(), t.deps().end(),
                       [](const DependencyEdge& e) { return e.from.step < e.to.step; });
}

bool is_multi_threaded_step(const Trajectory& t, std::size_t step_index) {
    const Step& st = t.step(step_index);
    const auto& calls = st.calls;
    for (std::size_t a = 0; a < calls.size(); ++a) {
        for (std::size_t b = a + 1; b < calls.size(); ++b) {
            CallRef ra{step_index, calls[a].slot_index};
            CallRef rb{step_index, calls[b].slot_index};
            bool linked = std::any_of(t.deps().begin(), t.deps().end(), [&](const DependencyEdge& e) {
                return (e.from == ra && e.to == rb) || (e.from == rb && e.to == ra);
            });
            if (!linked) {
                return true;
            }
        }
    }
    return false;
}

CallCounts call_counts(const Trajectory& t) {
    CallCounts out;
    out.per_step.reserve(t.step_count());
    for (const auto& st : t.steps()) {
        out.per_step.push_back(st.calls.size());
        out.total += st.calls.size();
    }
    return out;
}

}  // namespace trajalign
