#pragma once

#include <nlohmann/json.hpp>

#include "multicam/scenegraph/scene_graph.hpp"

namespace multicam {

inline constexpr int kSnapshotSchemaVersion = 1;

nlohmann::json snapshot_to_json(const GraphSnapshot &snapshot);

/// Throws ParseError on malformed input and SchemaVersionMismatch on an
/// unknown "v".
GraphSnapshot snapshot_from_json(const nlohmann::json &doc);

}  // namespace multicam
