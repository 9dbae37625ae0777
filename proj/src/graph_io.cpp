#include "crs/graph_io.hpp"

#include <fstream>
#include <sstream>

#include "crs/error.hpp"

namespace crs {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Frame parse_frame_key(const std::string& key, const std::string& where) {
  try {
    std::size_t used = 0;
    int v = std::stoi(key, &used);
    if (used == key.size()) return v;
  } catch (const std::exception&) {
  }
  throw SchemaError(where + ": frame key '" + key + "' is not an integer");
}

const json& require(const json& doc, const char* key, const std::string& where) {
  if (!doc.is_object() || !doc.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
  return doc.at(key);
}

std::string require_string(const json& doc, const char* key, const std::string& where) {
  const auto& v = require(doc, key, where);
  if (!v.is_string()) throw SchemaError(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a number");
  return v.get<double>();
}

}  // namespace

ordered_json marker_to_json(const CameraMarker& marker) {
  ordered_json out;
  out["camera"] = std::string(camera_name(marker.camera));
  if (const auto* p = std::get_if<Point>(&marker.shape)) {
    out["point"] = {p->x, p->y};
  } else {
    const auto& b = std::get<Box>(marker.shape);
    out["box"] = {b.x1, b.y1, b.x2, b.y2};
  }
  return out;
}

CameraMarker marker_from_json(const json& doc) {
  const std::string where = "marker";
  CameraMarker m;
  auto cam = parse_camera(require_string(doc, "camera", where));
  if (!cam) throw SchemaError(where + ": camera must be LEFT, CENTER or RIGHT");
  m.camera = *cam;
  if (doc.contains("point")) {
    const auto& p = doc.at("point");
    if (!p.is_array() || p.size() != 2) throw SchemaError(where + ": point must be [x, y]");
    m.shape = Point{number(p[0], where), number(p[1], where)};
  } else if (doc.contains("box")) {
    const auto& b = doc.at("box");
    if (!b.is_array() || b.size() != 4) throw SchemaError(where + ": box must be [x1, y1, x2, y2]");
    m.shape = Box{number(b[0], where), number(b[1], where), number(b[2], where), number(b[3], where)};
  } else {
    throw SchemaError(where + ": needs 'point' or 'box'");
  }
  return m;
}

ordered_json value_to_json(const PropertyValue& value) {
  if (value.is_static()) return value.static_value();
  ordered_json out = ordered_json::object();
  for (const auto& [frame, v] : value.temporal_values()) out[std::to_string(frame)] = v;
  return out;
}

PropertyValue value_from_json(const json& doc, const std::string& where) {
  if (doc.is_string()) return PropertyValue::fixed(doc.get<std::string>());
  if (!doc.is_object()) throw SchemaError(where + ": value must be a string or a {frame: value} object");
  std::map<Frame, std::string> values;
  for (const auto& [key, v] : doc.items()) {
    if (!v.is_string()) throw SchemaError(where + ": per-frame values must be strings");
    values.emplace(parse_frame_key(key, where), v.get<std::string>());
  }
  return PropertyValue::temporal(std::move(values));
}

SceneGraph graph_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("graph: document must be an object");
  const auto& version = require(doc, "schema_version", "graph");
  if (!version.is_number_integer() || version.get<int>() != kGraphSchemaVersion) {
    throw SchemaError("graph: unsupported schema_version " + version.dump() + " (expected " +
                      std::to_string(kGraphSchemaVersion) + ")");
  }
  SceneGraph g;
  g.scene_id = require_string(doc, "scene_id", "graph");
  const std::string where = "scene '" + g.scene_id + "'";

  const auto& range = require(doc, "frame_range", where);
  if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() || !range[1].is_number_integer())
    throw SchemaError(where + ": frame_range must be [first, last]");
  g.frame_range = {range[0].get<int>(), range[1].get<int>()};

  if (doc.contains("image_dims")) {
    const auto& d = doc.at("image_dims");
    g.image_dims.width = require(d, "width", where + " image_dims").get<int>();
    g.image_dims.height = require(d, "height", where + " image_dims").get<int>();
  }
  if (doc.contains("images")) {
    for (const auto& [fkey, cams] : doc.at("images").items()) {
      Frame f = parse_frame_key(fkey, where + " images");
      for (const auto& [cname, path] : cams.items()) {
        auto cam = parse_camera(cname);
        if (!cam || !path.is_string()) throw SchemaError(where + ": bad image entry for frame " + fkey);
        g.images[f][*cam] = path.get<std::string>();
      }
    }
  }
  if (doc.contains("declared_types")) g.declared_types = doc.at("declared_types").get<std::vector<std::string>>();

  for (const auto& jn : require(doc, "nodes", where)) {
    Node n;
    n.id = require_string(jn, "id", where + " node");
    const std::string nwhere = where + " node '" + n.id + "'";
    n.type = require_string(jn, "type", nwhere);
    n.is_unique = jn.value("unique", false);
    if (jn.contains("properties")) {
      for (const auto& [key, v] : jn.at("properties").items())
        n.properties.emplace(key, value_from_json(v, nwhere + " property '" + key + "'"));
    }
    if (jn.contains("unique_properties"))
      n.unique_property_keys = jn.at("unique_properties").get<std::vector<std::string>>();
    if (jn.contains("markers")) {
      for (const auto& [fkey, list] : jn.at("markers").items()) {
        Frame f = parse_frame_key(fkey, nwhere + " markers");
        auto& dst = n.markers[f];
        for (const auto& jm : list) dst.push_back(marker_from_json(jm));
      }
    }
    if (jn.contains("visible_frames")) {
      for (const auto& f : jn.at("visible_frames")) n.visible_frames.insert(f.get<int>());
    }
    n.source_id = jn.value("source_id", "");
    if (jn.contains("world_position")) n.world_position = jn.at("world_position");
    // Ego is unique by construction.
    if (n.type == "ego") n.is_unique = true;
    g.nodes.push_back(std::move(n));
  }

  for (const auto& je : require(doc, "edges", where)) {
    Edge e;
    e.id = require_string(je, "id", where + " edge");
    const std::string ewhere = where + " edge '" + e.id + "'";
    e.source = require_string(je, "source", ewhere);
    e.target = require_string(je, "target", ewhere);
    e.label = value_from_json(require(je, "label", ewhere), ewhere + " label");
    e.is_unique = je.value("unique", false);
    g.edges.push_back(std::move(e));
  }

  if (doc.contains("completeness")) {
    for (const auto& jc : doc.at("completeness")) {
      Frame f = require(jc, "frame", where + " completeness").get<int>();
      std::string type = require_string(jc, "type", where + " completeness");
      g.completeness[{f, type}] = require(jc, "complete", where + " completeness").get<bool>();
    }
  }
  g.check();
  return g;
}

ordered_json graph_to_json(const SceneGraph& g) {
  ordered_json out;
  out["schema_version"] = kGraphSchemaVersion;
  out["scene_id"] = g.scene_id;
  out["frame_range"] = {g.frame_range.first, g.frame_range.last};
  out["image_dims"] = {{"width", g.image_dims.width}, {"height", g.image_dims.height}};
  if (!g.images.empty()) {
    ordered_json images = ordered_json::object();
    for (const auto& [frame, cams] : g.images) {
      ordered_json jc = ordered_json::object();
      for (const auto& [cam, path] : cams) jc[std::string(camera_name(cam))] = path;
      images[std::to_string(frame)] = jc;
    }
    out["images"] = images;
  }
  if (!g.declared_types.empty()) out["declared_types"] = g.declared_types;

  ordered_json nodes = ordered_json::array();
  for (const auto& n : g.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["type"] = n.type;
    jn["unique"] = n.is_unique;
    ordered_json props = ordered_json::object();
    for (const auto& [key, v] : n.properties) props[key] = value_to_json(v);
    jn["properties"] = props;
    if (!n.unique_property_keys.empty()) jn["unique_properties"] = n.unique_property_keys;
    if (!n.markers.empty()) {
      ordered_json markers = ordered_json::object();
      for (const auto& [frame, list] : n.markers) {
        ordered_json jl = ordered_json::array();
        for (const auto& m : list) jl.push_back(marker_to_json(m));
        markers[std::to_string(frame)] = jl;
      }
      jn["markers"] = markers;
    }
    if (!n.visible_frames.empty()) jn["visible_frames"] = n.visible_frames;
    if (!n.source_id.empty()) jn["source_id"] = n.source_id;
    if (!n.world_position.is_null()) jn["world_position"] = ordered_json::parse(n.world_position.dump());
    nodes.push_back(std::move(jn));
  }
  out["nodes"] = nodes;

  ordered_json edges = ordered_json::array();
  for (const auto& e : g.edges) {
    ordered_json je;
    je["id"] = e.id;
    je["source"] = e.source;
    je["target"] = e.target;
    je["label"] = value_to_json(e.label);
    je["unique"] = e.is_unique;
    edges.push_back(std::move(je));
  }
  out["edges"] = edges;

  ordered_json comp = ordered_json::array();
  for (const auto& [key, flag] : g.completeness) {
    comp.push_back(ordered_json{{"frame", key.first}, {"type", key.second}, {"complete", flag}});
  }
  out["completeness"] = comp;
  return out;
}

std::string serialize_graph(const SceneGraph& graph) { return graph_to_json(graph).dump(2) + "\n"; }

ordered_json frame_graph_to_json(const FrameGraph& fg) {
  ordered_json out;
  out["scene_id"] = fg.scene_id;
  out["frame"] = fg.frame;
  ordered_json nodes = ordered_json::array();
  for (const auto& n : fg.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["type"] = n.type;
    jn["unique"] = n.is_unique;
    ordered_json props = ordered_json::object();
    for (const auto& [k, v] : n.properties) props[k] = v;
    jn["properties"] = props;
    jn["unique_properties"] = n.unique_property_keys;
    ordered_json markers = ordered_json::array();
    for (const auto& m : n.markers) markers.push_back(marker_to_json(m));
    jn["markers"] = markers;
    nodes.push_back(std::move(jn));
  }
  out["nodes"] = nodes;
  ordered_json edges = ordered_json::array();
  for (const auto& e : fg.edges) {
    edges.push_back(ordered_json{
        {"id", e.id}, {"source", e.source}, {"target", e.target}, {"label", e.label}, {"unique", e.is_unique}});
  }
  out["edges"] = edges;
  ordered_json anchors = ordered_json::object();
  for (const auto& [node, list] : fg.anchor_map) {
    ordered_json jl = ordered_json::array();
    for (const auto& a : list) jl.push_back(ordered_json{{"neighbor", a.neighbor}, {"label", a.label}, {"edge", a.edge_id}});
    anchors[node] = jl;
  }
  out["anchor_map"] = anchors;
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) throw ParseError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

json parse_json_file(const std::filesystem::path& path) {
  auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

SceneGraph load_graph(const std::filesystem::path& path) {
  auto doc = parse_json_file(path);
  try {
    return graph_from_json(doc);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_graph(const std::filesystem::path& path, const SceneGraph& graph) {
  write_text_file(path, serialize_graph(graph));
}

}  // namespace crs
