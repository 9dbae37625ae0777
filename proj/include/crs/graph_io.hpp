#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "crs/graph.hpp"

namespace crs {

inline constexpr int kGraphSchemaVersion = 1;

/// Parses a scene-graph document. Throws SchemaError on a malformed or
/// version-mismatched document and on violated graph invariants.
SceneGraph graph_from_json(const nlohmann::json& doc);
nlohmann::ordered_json graph_to_json(const SceneGraph& graph);

/// Canonical text form: two-space indented JSON with a trailing newline.
/// serialize(parse(serialize(g))) == serialize(g) for every valid graph.
std::string serialize_graph(const SceneGraph& graph);

SceneGraph load_graph(const std::filesystem::path& path);
void save_graph(const std::filesystem::path& path, const SceneGraph& graph);

nlohmann::ordered_json marker_to_json(const CameraMarker& marker);
CameraMarker marker_from_json(const nlohmann::json& doc);
nlohmann::ordered_json value_to_json(const PropertyValue& value);
PropertyValue value_from_json(const nlohmann::json& doc, const std::string& where);
nlohmann::ordered_json frame_graph_to_json(const FrameGraph& fg);

/// Reads a whole file; throws ParseError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial files.
void write_text_file(const std::filesystem::path& path, const std::string& text);
nlohmann::json parse_json_file(const std::filesystem::path& path);

}  // namespace crs
