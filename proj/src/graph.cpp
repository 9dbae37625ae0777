#include "crs/graph.hpp"

#include <algorithm>
#include <sstream>

#include "crs/error.hpp"

namespace crs {

std::string_view camera_name(Camera camera) {
  switch (camera) {
    case Camera::Left:
      return "LEFT";
    case Camera::Center:
      return "CENTER";
    case Camera::Right:
      return "RIGHT";
  }
  return "CENTER";
}

std::optional<Camera> parse_camera(std::string_view name) {
  if (name == "LEFT") return Camera::Left;
  if (name == "CENTER") return Camera::Center;
  if (name == "RIGHT") return Camera::Right;
  return std::nullopt;
}

bool CameraMarker::within(const ImageDims& dims) const {
  auto in_x = [&](double x) { return x >= 0 && x <= dims.width; };
  auto in_y = [&](double y) { return y >= 0 && y <= dims.height; };
  if (const auto* p = std::get_if<Point>(&shape)) return in_x(p->x) && in_y(p->y);
  const auto& b = std::get<Box>(shape);
  return in_x(b.x1) && in_x(b.x2) && in_y(b.y1) && in_y(b.y2) && b.x1 <= b.x2 && b.y1 <= b.y2;
}

PropertyValue PropertyValue::fixed(std::string value) {
  PropertyValue v;
  v.value_ = std::move(value);
  return v;
}

PropertyValue PropertyValue::temporal(std::map<Frame, std::string> values) {
  PropertyValue v;
  v.value_ = std::move(values);
  return v;
}

std::optional<std::string> PropertyValue::at(Frame t) const {
  if (const auto* s = std::get_if<std::string>(&value_)) return *s;
  const auto& m = std::get<std::map<Frame, std::string>>(value_);
  if (auto it = m.find(t); it != m.end()) return it->second;
  return std::nullopt;
}

const std::string& PropertyValue::static_value() const { return std::get<std::string>(value_); }

const std::map<Frame, std::string>& PropertyValue::temporal_values() const {
  return std::get<std::map<Frame, std::string>>(value_);
}

std::map<Frame, std::string>& PropertyValue::temporal_values() {
  return std::get<std::map<Frame, std::string>>(value_);
}

std::vector<std::string> PropertyValue::all_values() const {
  if (is_static()) return {static_value()};
  std::vector<std::string> out;
  for (const auto& [frame, v] : temporal_values()) out.push_back(v);
  return out;
}

bool Node::visible_at(Frame t) const {
  if (visible_frames.count(t)) return true;
  auto it = markers.find(t);
  return it != markers.end() && !it->second.empty();
}

const std::vector<CameraMarker>* Node::markers_at(Frame t) const {
  auto it = markers.find(t);
  if (it == markers.end() || it->second.empty()) return nullptr;
  return &it->second;
}

const Node* SceneGraph::find_node(const NodeId& id) const {
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const Node& n) { return n.id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

Node* SceneGraph::find_node(const NodeId& id) {
  return const_cast<Node*>(std::as_const(*this).find_node(id));
}

const Edge* SceneGraph::find_edge(const std::string& id) const {
  auto it = std::find_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.id == id; });
  return it == edges.end() ? nullptr : &*it;
}

Edge* SceneGraph::find_edge(const std::string& id) {
  return const_cast<Edge*>(std::as_const(*this).find_edge(id));
}

void SceneGraph::check() const {
  std::vector<std::string> problems;
  if (frame_range.last < frame_range.first) problems.push_back("frame_range is empty");

  auto check_value = [&](const PropertyValue& v, const std::string& where) {
    if (v.is_static()) return;
    if (v.temporal_values().empty()) problems.push_back(where + ": temporal value has no frames");
    for (const auto& [frame, _] : v.temporal_values()) {
      if (!frame_range.contains(frame))
        problems.push_back(where + ": frame " + std::to_string(frame) + " outside frame_range");
    }
  };

  std::set<NodeId> ids;
  std::set<std::string> types;
  for (const auto& node : nodes) {
    if (!ids.insert(node.id).second) problems.push_back("duplicate node id " + node.id);
    types.insert(node.type);
    for (const auto& [key, value] : node.properties) check_value(value, "node " + node.id + " property " + key);
    for (const auto& key : node.unique_property_keys) {
      if (!node.properties.count(key))
        problems.push_back("node " + node.id + ": unique property key '" + key + "' has no property");
    }
    for (const auto& [frame, markers] : node.markers) {
      if (!frame_range.contains(frame))
        problems.push_back("node " + node.id + ": marker frame " + std::to_string(frame) + " outside frame_range");
      for (const auto& m : markers) {
        if (!m.within(image_dims))
          problems.push_back("node " + node.id + ": marker at frame " + std::to_string(frame) + " outside image");
      }
    }
    for (Frame f : node.visible_frames) {
      if (!frame_range.contains(f))
        problems.push_back("node " + node.id + ": visible frame " + std::to_string(f) + " outside frame_range");
    }
  }
  std::set<std::string> edge_ids;
  for (const auto& edge : edges) {
    if (!edge_ids.insert(edge.id).second) problems.push_back("duplicate edge id " + edge.id);
    if (!ids.count(edge.source)) problems.push_back("edge " + edge.id + ": unknown source " + edge.source);
    if (!ids.count(edge.target)) problems.push_back("edge " + edge.id + ": unknown target " + edge.target);
    check_value(edge.label, "edge " + edge.id + " label");
  }
  for (const auto& [key, flag] : completeness) {
    if (!frame_range.contains(key.first))
      problems.push_back("completeness frame " + std::to_string(key.first) + " outside frame_range");
    bool declared = std::find(declared_types.begin(), declared_types.end(), key.second) != declared_types.end();
    if (!types.count(key.second) && !declared)
      problems.push_back("completeness for undeclared type '" + key.second + "'");
  }
  for (const auto& [frame, cams] : images) {
    if (!frame_range.contains(frame))
      problems.push_back("image frame " + std::to_string(frame) + " outside frame_range");
  }

  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "scene '" << scene_id << "' violates graph invariants:";
    for (const auto& p : problems) msg << "\n  " << p;
    throw SchemaError(msg.str());
  }
}

// ---------------------------------------------------------------------------

const FrameNode* FrameGraph::find(const NodeId& id) const {
  if (index_.size() != nodes.size()) {
    auto it = std::find_if(nodes.begin(), nodes.end(), [&](const FrameNode& n) { return n.id == id; });
    return it == nodes.end() ? nullptr : &*it;
  }
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes[it->second];
}

const FrameNode& FrameGraph::at(const NodeId& id) const {
  if (const auto* n = find(id)) return *n;
  throw NotFoundError("node '" + id + "' is not present in frame " + std::to_string(frame) + " of scene '" +
                      scene_id + "'");
}

std::vector<const FrameEdge*> FrameGraph::outgoing(const NodeId& id) const {
  std::vector<const FrameEdge*> out;
  for (const auto& e : edges) {
    if (e.source == id) out.push_back(&e);
  }
  return out;
}

std::vector<const FrameEdge*> FrameGraph::incoming(const NodeId& id) const {
  std::vector<const FrameEdge*> out;
  for (const auto& e : edges) {
    if (e.target == id) out.push_back(&e);
  }
  return out;
}

std::vector<const FrameNode*> FrameGraph::of_type(std::string_view type) const {
  std::vector<const FrameNode*> out;
  for (const auto& n : nodes) {
    if (n.type == type) out.push_back(&n);
  }
  return out;
}

void FrameGraph::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < nodes.size(); ++i) index_.emplace(nodes[i].id, i);
}

FrameGraph frame_view(const SceneGraph& graph, Frame t) {
  if (!graph.frame_range.contains(t)) {
    throw RangeError("frame " + std::to_string(t) + " outside frame_range [" +
                     std::to_string(graph.frame_range.first) + ", " + std::to_string(graph.frame_range.last) +
                     "] of scene '" + graph.scene_id + "'");
  }
  FrameGraph fg;
  fg.scene_id = graph.scene_id;
  fg.frame = t;
  fg.image_dims = graph.image_dims;

  std::set<NodeId> visible;
  for (const auto& node : graph.nodes) {
    if (!node.visible_at(t)) continue;
    visible.insert(node.id);
    FrameNode fn;
    fn.id = node.id;
    fn.type = node.type;
    fn.is_unique = node.is_unique;
    for (const auto& [key, value] : node.properties) {
      if (auto v = value.at(t)) fn.properties.emplace(key, *v);
    }
    for (const auto& key : node.unique_property_keys) {
      if (fn.properties.count(key)) fn.unique_property_keys.push_back(key);
    }
    if (const auto* markers = node.markers_at(t)) fn.markers = *markers;
    fg.nodes.push_back(std::move(fn));
  }

  for (const auto& edge : graph.edges) {
    if (!visible.count(edge.source) || !visible.count(edge.target)) continue;
    auto label = edge.label.at(t);
    if (!label) continue;
    fg.edges.push_back(FrameEdge{edge.id, edge.source, edge.target, *label, edge.is_unique});
    if (edge.is_unique) fg.anchor_map[edge.source].push_back(AnchorEntry{edge.target, *label, edge.id});
  }
  fg.reindex();
  return fg;
}

bool is_complete(const SceneGraph& graph, Frame t, const std::string& node_type) {
  if (!graph.frame_range.contains(t)) {
    throw RangeError("frame " + std::to_string(t) + " outside frame_range of scene '" + graph.scene_id + "'");
  }
  auto it = graph.completeness.find({t, node_type});
  return it != graph.completeness.end() && it->second;
}

}  // namespace crs
