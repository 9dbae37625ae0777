#pragma once

// Scene-graph data model: nodes with open-vocabulary types and (possibly
// per-frame) properties, labelled directed edges, image-space grounding,
// uniqueness anchors and per-frame completeness flags.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace crs {

using NodeId = std::string;
using Frame = int;

struct FrameRange {
  Frame first = 0;
  Frame last = 0;

  bool contains(Frame t) const { return t >= first && t <= last; }
  int size() const { return last - first + 1; }
  bool operator==(const FrameRange&) const = default;
};

enum class Camera { Left, Center, Right };

std::string_view camera_name(Camera camera);
std::optional<Camera> parse_camera(std::string_view name);

struct ImageDims {
  int width = 1920;
  int height = 1080;
  bool operator==(const ImageDims&) const = default;
};

struct Point {
  double x = 0;
  double y = 0;
  bool operator==(const Point&) const = default;
};

struct Box {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;
  bool operator==(const Box&) const = default;
};

/// A point or box in pixel coordinates of one camera image.
struct CameraMarker {
  Camera camera = Camera::Center;
  std::variant<Point, Box> shape;

  bool is_point() const { return std::holds_alternative<Point>(shape); }
  bool within(const ImageDims& dims) const;
  bool operator==(const CameraMarker&) const = default;
};

/// Property value or edge label: either one value for the whole scene or an
/// exact per-frame map. A frame missing from the map means "unknown at t".
class PropertyValue {
 public:
  PropertyValue() = default;
  static PropertyValue fixed(std::string value);
  static PropertyValue temporal(std::map<Frame, std::string> values);

  bool is_static() const { return std::holds_alternative<std::string>(value_); }
  std::optional<std::string> at(Frame t) const;

  const std::string& static_value() const;
  const std::map<Frame, std::string>& temporal_values() const;
  std::map<Frame, std::string>& temporal_values();

  /// Every text the value can take, used by the canonical validator.
  std::vector<std::string> all_values() const;

  bool operator==(const PropertyValue&) const = default;

 private:
  std::variant<std::string, std::map<Frame, std::string>> value_{std::string{}};
};

struct Node {
  NodeId id;
  std::string type;
  std::map<std::string, PropertyValue> properties;
  bool is_unique = false;
  std::vector<std::string> unique_property_keys;
  std::map<Frame, std::vector<CameraMarker>> markers;
  std::set<Frame> visible_frames;
  std::string source_id;
  nlohmann::json world_position;  // pass-through, unused by generation

  bool visible_at(Frame t) const;
  const std::vector<CameraMarker>* markers_at(Frame t) const;
  bool operator==(const Node&) const = default;
};

struct Edge {
  std::string id;
  NodeId source;
  NodeId target;
  PropertyValue label;
  bool is_unique = false;
  bool operator==(const Edge&) const = default;
};

using CompletenessKey = std::pair<Frame, std::string>;

struct SceneGraph {
  std::string scene_id;
  FrameRange frame_range;
  ImageDims image_dims;
  std::map<Frame, std::map<Camera, std::string>> images;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::map<CompletenessKey, bool> completeness;
  std::vector<std::string> declared_types;

  const Node* find_node(const NodeId& id) const;
  Node* find_node(const NodeId& id);
  const Edge* find_edge(const std::string& id) const;
  Edge* find_edge(const std::string& id);

  /// Checks the structural invariants; throws SchemaError listing every
  /// violation found.
  void check() const;

  bool operator==(const SceneGraph&) const = default;
};

// ---------------------------------------------------------------------------
// Per-frame projection

struct FrameNode {
  NodeId id;
  std::string type;
  std::map<std::string, std::string> properties;
  bool is_unique = false;
  std::vector<std::string> unique_property_keys;  // only keys resolved at t
  std::vector<CameraMarker> markers;
  bool operator==(const FrameNode&) const = default;
};

struct FrameEdge {
  std::string id;
  NodeId source;
  NodeId target;
  std::string label;
  bool is_unique = false;
  bool operator==(const FrameEdge&) const = default;
};

struct AnchorEntry {
  NodeId neighbor;
  std::string label;
  std::string edge_id;
  bool operator==(const AnchorEntry&) const = default;
};

class FrameGraph {
 public:
  std::string scene_id;
  Frame frame = 0;
  ImageDims image_dims;
  std::vector<FrameNode> nodes;
  std::vector<FrameEdge> edges;
  std::map<NodeId, std::vector<AnchorEntry>> anchor_map;

  const FrameNode* find(const NodeId& id) const;
  /// Throws NotFoundError for nodes absent at this frame.
  const FrameNode& at(const NodeId& id) const;
  std::vector<const FrameEdge*> outgoing(const NodeId& id) const;
  std::vector<const FrameEdge*> incoming(const NodeId& id) const;
  std::vector<const FrameNode*> of_type(std::string_view type) const;

  void reindex();
  bool operator==(const FrameGraph& other) const {
    return scene_id == other.scene_id && frame == other.frame && image_dims == other.image_dims &&
           nodes == other.nodes && edges == other.edges && anchor_map == other.anchor_map;
  }

 private:
  std::unordered_map<NodeId, std::size_t> index_;
};

/// Resolves the graph at frame t. Throws RangeError outside frame_range.
FrameGraph frame_view(const SceneGraph& graph, Frame t);

/// Declared completeness flag c_t(type); undeclared means false.
bool is_complete(const SceneGraph& graph, Frame t, const std::string& node_type);

}  // namespace crs
