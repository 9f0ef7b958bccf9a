#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajalign/trajectory.hpp"

namespace trajalign {

/// Knobs of the canonical call signature.
struct SerializationPolicy {
    /// Dotted argument paths ("filters.ids") whose list values are sets.
    std::vector<std::string> set_typed_paths;
    /// Fixed number of decimals for non-integral numbers; shortest
    /// round-trip representation when unset.
    std::optional<int> float_decimals;
    /// Maximum nesting depth; the argument root counts as depth 1.
    int max_depth = 32;

    /// Throws PolicyError when a path or the depth cap is malformed.
    void validate() const;
};

SerializationPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SerializationPolicy& p);

/// Canonical text signature of a call:
/// `tool=<tool> | <key.path>=<value> | ...` with key paths sorted.
///
/// Lists render as `[e1,e2]` (sorted by element rendering at set-typed
/// paths, in order otherwise); mappings inside lists render inline as
/// `{k=v,...}`; empty containers render as `{}` / `[]`. Strings are written
/// verbatim unless they contain a reserved character or would read back as
/// another scalar, in which case they are JSON-quoted; the same applies to
/// keys. Non-finite numbers raise NonSerializableError; nesting deeper than
/// `max_depth` raises DepthError.
std::string serialize_call(const ToolCall& call, const SerializationPolicy& policy);

}  // namespace trajalign
