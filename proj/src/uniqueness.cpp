#include "crs/uniqueness.hpp"

#include <algorithm>
#include <set>

#include "crs/error.hpp"

namespace crs {

std::vector<NodeId> node_anchor_collisions(const FrameGraph& fg, const NodeId& node) {
  const auto& self = fg.at(node);
  std::vector<NodeId> out;
  for (const auto& n : fg.nodes) {
    if (n.id != node && n.type == self.type) out.push_back(n.id);
  }
  return out;
}

std::vector<NodeId> property_anchor_collisions(const FrameGraph& fg, const NodeId& node, const std::string& key,
                                               const std::string& description_key) {
  const auto& self = fg.at(node);
  auto it = self.properties.find(key);
  if (it == self.properties.end()) return {};
  std::vector<NodeId> out;
  for (const auto& n : fg.nodes) {
    if (n.id == node) continue;
    // A description renders without the type, so it must be unique scene-wide.
    if (key != description_key && n.type != self.type) continue;
    auto other = n.properties.find(key);
    if (other != n.properties.end() && other->second == it->second) out.push_back(n.id);
  }
  return out;
}

std::vector<NodeId> edge_anchor_collisions(const FrameGraph& fg, const FrameEdge& edge) {
  const auto& source = fg.at(edge.source);
  std::set<NodeId> out;
  for (const auto& e : fg.edges) {
    if (e.source == edge.source || e.target != edge.target || e.label != edge.label) continue;
    const auto* other = fg.find(e.source);
    if (other && other->type == source.type) out.insert(e.source);
  }
  return {out.begin(), out.end()};
}

bool AnchorCheck::unique() const {
  return std::all_of(collisions_by_frame.begin(), collisions_by_frame.end(),
                     [](const auto& kv) { return kv.second.empty(); });
}

std::vector<NodeId> AnchorCheck::collides_with() const {
  std::set<NodeId> all;
  for (const auto& [frame, ids] : collisions_by_frame) all.insert(ids.begin(), ids.end());
  return {all.begin(), all.end()};
}

namespace {

template <typename Fn>
void for_each_frame(const SceneGraph& graph, Fn&& fn) {
  for (Frame t = graph.frame_range.first; t <= graph.frame_range.last; ++t) fn(t, frame_view(graph, t));
}

}  // namespace

AnchorCheck check_node_anchor(const SceneGraph& graph, const NodeId& node) {
  if (!graph.find_node(node)) throw NotFoundError("unknown node '" + node + "'");
  AnchorCheck check{"node:" + node, {}};
  for_each_frame(graph, [&](Frame t, const FrameGraph& fg) {
    if (fg.find(node)) check.collisions_by_frame[t] = node_anchor_collisions(fg, node);
  });
  return check;
}

AnchorCheck check_property_anchor(const SceneGraph& graph, const NodeId& node, const std::string& key) {
  if (!graph.find_node(node)) throw NotFoundError("unknown node '" + node + "'");
  AnchorCheck check{"property:" + node + ":" + key, {}};
  for_each_frame(graph, [&](Frame t, const FrameGraph& fg) {
    const auto* n = fg.find(node);
    if (n && n->properties.count(key)) check.collisions_by_frame[t] = property_anchor_collisions(fg, node, key);
  });
  return check;
}

AnchorCheck check_edge_anchor(const SceneGraph& graph, const std::string& edge_id) {
  if (!graph.find_edge(edge_id)) throw NotFoundError("unknown edge '" + edge_id + "'");
  AnchorCheck check{"edge:" + edge_id, {}};
  for_each_frame(graph, [&](Frame t, const FrameGraph& fg) {
    for (const auto& e : fg.edges) {
      if (e.id == edge_id) check.collisions_by_frame[t] = edge_anchor_collisions(fg, e);
    }
  });
  return check;
}

std::vector<AnchorCheck> check_all_anchors(const SceneGraph& graph) {
  std::vector<FrameGraph> frames;
  for (Frame t = graph.frame_range.first; t <= graph.frame_range.last; ++t) frames.push_back(frame_view(graph, t));

  std::vector<AnchorCheck> out;
  for (const auto& node : graph.nodes) {
    if (node.is_unique) {
      AnchorCheck check{"node:" + node.id, {}};
      for (const auto& fg : frames) {
        if (fg.find(node.id)) check.collisions_by_frame[fg.frame] = node_anchor_collisions(fg, node.id);
      }
      out.push_back(std::move(check));
    }
    for (const auto& key : node.unique_property_keys) {
      AnchorCheck check{"property:" + node.id + ":" + key, {}};
      for (const auto& fg : frames) {
        const auto* n = fg.find(node.id);
        if (n && n->properties.count(key))
          check.collisions_by_frame[fg.frame] = property_anchor_collisions(fg, node.id, key);
      }
      out.push_back(std::move(check));
    }
  }
  for (const auto& edge : graph.edges) {
    if (!edge.is_unique) continue;
    AnchorCheck check{"edge:" + edge.id, {}};
    for (const auto& fg : frames) {
      for (const auto& e : fg.edges) {
        if (e.id == edge.id) check.collisions_by_frame[fg.frame] = edge_anchor_collisions(fg, e);
      }
    }
    out.push_back(std::move(check));
  }
  return out;
}

nlohmann::ordered_json anchor_check_to_json(const AnchorCheck& check) {
  nlohmann::ordered_json out;
  out["anchor"] = check.anchor;
  out["unique"] = check.unique();
  out["collides_with"] = check.collides_with();
  nlohmann::ordered_json frames = nlohmann::ordered_json::object();
  for (const auto& [frame, ids] : check.collisions_by_frame) {
    frames[std::to_string(frame)] = {{"unique", ids.empty()}, {"collides_with", ids}};
  }
  out["frames"] = frames;
  return out;
}

}  // namespace crs
