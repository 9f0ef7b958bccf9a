#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace trajalign {

/// Argument tree of a tool call. The root is always an object; leaves are
/// scalars, arrays or nested objects.
using ArgumentTree = nlohmann::json;

/// Position of a call inside a trajectory, 0-based on both axes.
struct CallRef {
    std::size_t step = 0;
    std::size_t slot = 0;

    friend auto operator<=>(const CallRef&, const CallRef&) = default;
};

/// Directed dependency `from -> to`; `from.step < to.step` always holds.
struct DependencyEdge {
    CallRef from;
    CallRef to;

    friend auto operator<=>(const DependencyEdge&, const DependencyEdge&) = default;
};

struct ToolCall {
    std::string tool;  ///< "server_name/tool_name"
    ArgumentTree arguments = ArgumentTree::object();
    std::size_t step_index = 0;
    std::size_t slot_index = 0;
};

/// Check the qualified-name rule: non-empty and exactly one '/' with
/// non-empty halves.
bool is_qualified_tool_name(const std::string& name);

struct Step {
    std::size_t index = 0;
    std::vector<ToolCall> calls;
};

/// Immutable trajectory: ordered steps, each an unordered set of calls
/// (slot indices are labels only), plus declared cross-step dependencies.
///
/// The constructor validates every structural invariant and throws
/// InvariantError naming the offending location.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::vector<Step> steps,
               std::vector<DependencyEdge> deps = {},
               std::map<std::string, std::string> meta = {});

    const std::vector<Step>& steps() const noexcept { return steps_; }
    const std::vector<DependencyEdge>& deps() const noexcept { return deps_; }
    const std::map<std::string, std::string>& meta() const noexcept { return meta_; }

    std::size_t step_count() const noexcept { return steps_.size(); }
    const Step& step(std::size_t index) const;

    /// Calls flattened in step order, then slot order. Global call indices
    /// used by the similarity matrix and the match set refer to this list.
    const std::vector<ToolCall>& flat_calls() const noexcept { return flat_; }
    std::size_t call_count() const noexcept { return flat_.size(); }

private:
    std::vector<Step> steps_;
    std::vector<DependencyEdge> deps_;
    std::map<std::string, std::string> meta_;
    std::vector<ToolCall> flat_;
};

/// Build a trajectory from its JSON document form:
/// `{"meta": {...}, "steps": [{"index": i, "calls": [{"tool", "arguments"}]}],
///   "deps": [[[i,a],[j,b]], ...]}`.
/// Throws SchemaError for wrong shapes and InvariantError for broken
/// invariants; both messages carry a JSON-pointer-like path.
Trajectory parse_trajectory(const nlohmann::json& doc);

/// Inverse of parse_trajectory. Calls are written in slot order.
nlohmann::json emit_trajectory(const Trajectory& t);

/// Read and parse a trajectory file. Malformed JSON surfaces as SchemaError
/// with the file path in the message.
Trajectory load_trajectory(const std::filesystem::path& path);

/// True iff the trajectory has at least two steps and a declared
/// dependency from an earlier step into a later one.
bool is_multi_hop(const Trajectory& t);

/// True iff step `step_index` holds at least two calls with no declared
/// dependency between them. Throws IndexError when out of range.
bool is_multi_threaded_step(const Trajectory& t, std::size_t step_index);

struct CallCounts {
    std::vector<std::size_t> per_step;
    std::size_t total = 0;
};

CallCounts call_counts(const Trajectory& t);

}  // namespace trajalign
