#pragma once

// Collision checks for uniqueness anchors. A flagged anchor is consistent at
// frame t when no other visible node at t satisfies the same predicate.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/graph.hpp"

namespace crs {

std::vector<NodeId> node_anchor_collisions(const FrameGraph& fg, const NodeId& node);
std::vector<NodeId> property_anchor_collisions(const FrameGraph& fg, const NodeId& node, const std::string& key,
                                               const std::string& description_key = "description");
/// Other nodes of the source's type with an equally labelled edge to the same target.
std::vector<NodeId> edge_anchor_collisions(const FrameGraph& fg, const FrameEdge& edge);

struct AnchorCheck {
  std::string anchor;  // "node:<id>", "property:<id>:<key>" or "edge:<id>"
  std::map<Frame, std::vector<NodeId>> collisions_by_frame;  // frames where the anchor resolves
  bool unique() const;
  std::vector<NodeId> collides_with() const;
};

AnchorCheck check_node_anchor(const SceneGraph& graph, const NodeId& node);
AnchorCheck check_property_anchor(const SceneGraph& graph, const NodeId& node, const std::string& key);
AnchorCheck check_edge_anchor(const SceneGraph& graph, const std::string& edge_id);

/// Every flagged anchor of the scene, in graph order.
std::vector<AnchorCheck> check_all_anchors(const SceneGraph& graph);

nlohmann::ordered_json anchor_check_to_json(const AnchorCheck& check);

}  // namespace crs
