#pragma once

// Frame-indexed pre-annotation scaffold, node transfer and edge proposals.

#include <filesystem>
#include <map>
#include <set>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/catalog.hpp"
#include "crs/graph.hpp"

namespace crs {

inline constexpr int kScaffoldSchemaVersion = 1;

enum class ElementKind {
  LaneSegment,
  LaneLine,
  Intersection,
  Split,
  Merge,
  PedestrianCrossing,
  TrafficElement,
  Object,
};

std::string_view element_collection(ElementKind kind);  // "lane_segments", ...

struct ScaffoldElement {
  std::string source_id;
  ElementKind kind = ElementKind::Object;
  std::string category;  // traffic elements: traffic_light | sign; objects: class
  std::set<Frame> visible_frames;
  std::map<Frame, std::vector<CameraMarker>> markers;
  std::map<std::string, PropertyValue> properties;
  // Helper links, by source id.
  std::string left_neighbor;
  std::string right_neighbor;
  std::vector<std::string> left_of;   // lane lines: lanes this line is the left marking of
  std::vector<std::string> right_of;  // lane lines: lanes this line is the right marking of
  std::vector<std::string> controls;
  std::vector<std::string> intersections;  // crossings
  std::map<Frame, std::string> in_lane;
  std::map<Frame, std::string> in_intersection;
};

struct Scaffold {
  std::string scene_id;
  FrameRange frame_range;
  ImageDims image_dims;
  std::map<Frame, std::map<Camera, std::string>> images;
  nlohmann::json ego_poses;  // pass-through
  std::vector<ScaffoldElement> elements;

  const ScaffoldElement* find(const std::string& source_id) const;
  std::map<std::string, std::size_t> counts() const;  // per collection
};

/// Throws ParseError / SchemaError; dangling helper links are listed with
/// both the referencing and the missing id.
Scaffold scaffold_from_json(const nlohmann::json& doc);
Scaffold load_scaffold(const std::filesystem::path& path);
nlohmann::ordered_json scaffold_to_json(const Scaffold& scaffold);

/// Node type an element becomes.
std::string element_node_type(const ScaffoldElement& e, const Catalog& catalog);

/// Empty graph carrying the scaffold's scene metadata.
SceneGraph graph_shell(const Scaffold& scaffold);

/// Appends a node for the element. Throws ConflictError naming the existing
/// node when the element was already transferred.
const Node& transfer_node(const ScaffoldElement& element, SceneGraph& graph, const Catalog& catalog);

/// source_id -> node_id for every transferred node in the graph.
std::map<std::string, NodeId> transferred_map(const SceneGraph& graph);

struct EdgeProposal {
  std::string id;  // content hash
  NodeId source;
  NodeId target;
  PropertyValue label;
  std::string link;  // helper link that produced it
};

struct ProposalSet {
  std::vector<EdgeProposal> proposals;
  std::size_t skipped_links = 0;  // an endpoint was not transferred
};

/// Proposals for every helper link with both endpoints transferred and no
/// identical edge already in the graph.
ProposalSet auto_edges(const SceneGraph& graph, const Scaffold& scaffold, const Catalog& catalog);

/// Adds the proposed edge with a fresh id and returns that id.
std::string accept_proposal(SceneGraph& graph, const EdgeProposal& proposal);

nlohmann::ordered_json proposal_to_json(const EdgeProposal& p);

}  // namespace crs
