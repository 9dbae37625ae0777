#include "crs/descriptor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "crs/error.hpp"
#include "crs/graph_io.hpp"
#include "crs/text.hpp"

namespace crs {

std::string_view anchor_kind_name(AnchorKind kind) {
  switch (kind) {
    case AnchorKind::NodeType:
      return "node_type";
    case AnchorKind::Property:
      return "property";
    case AnchorKind::Relation:
      return "relation";
    case AnchorKind::PointMarker:
      return "point_marker";
    case AnchorKind::NonUnique:
      return "non_unique";
  }
  return "non_unique";
}

std::string indefinite_article(std::string_view word) {
  if (word.empty()) return "a";
  char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word.front())));
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
}

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

std::string render_marker(const CameraMarker& marker) {
  if (const auto* p = std::get_if<Point>(&marker.shape)) {
    return "<point>(" + std::to_string(round_half_up(p->x)) + "," + std::to_string(round_half_up(p->y)) +
           ")</point>";
  }
  const auto& b = std::get<Box>(marker.shape);
  return "<box>(" + std::to_string(round_half_up(b.x1)) + "," + std::to_string(round_half_up(b.y1)) + "," +
         std::to_string(round_half_up(b.x2)) + "," + std::to_string(round_half_up(b.y2)) + ")</box>";
}

namespace {

std::string render_terminal(const TerminalAnchor& a, const std::string& type, const RenderStyle& style) {
  switch (a.kind) {
    case AnchorKind::NodeType:
      return "the " + type;
    case AnchorKind::Property:
      if (a.key == style.description_key) return "the " + a.value;
      return format_template(style.property_phrase, {{"type", type}, {"key", a.key}, {"value", a.value}});
    case AnchorKind::PointMarker:
      return "the " + type + " at " + (a.marker ? render_marker(*a.marker) : std::string{});
    case AnchorKind::NonUnique:
    case AnchorKind::Relation:
      break;
  }
  return indefinite_article(type) + " " + type;
}

std::string wrap_relation(const std::string& type, const std::string& label, const std::string& inner) {
  return "the " + type + " that " + label + " " + inner;
}

Descriptor own_anchor(const FrameNode& node, TerminalAnchor terminal, bool unique, const RenderStyle& style) {
  Descriptor d;
  d.target = node.id;
  d.unique = unique;
  d.hops = 0;
  d.kind = terminal.kind;
  d.text = render_terminal(terminal, node.type, style);
  d.terminal = std::move(terminal);
  return d;
}

std::vector<Descriptor> build_impl(const FrameGraph& fg, const NodeId& id, int budget, std::set<NodeId> visited,
                                   const RenderStyle& style) {
  if (visited.count(id)) return {};
  visited.insert(id);
  const FrameNode& node = fg.at(id);
  std::vector<Descriptor> out;

  if (node.is_unique) out.push_back(own_anchor(node, {AnchorKind::NodeType, id, {}, {}, {}}, true, style));

  for (const auto& key : node.unique_property_keys) {
    auto it = node.properties.find(key);
    if (it == node.properties.end()) continue;
    out.push_back(own_anchor(node, {AnchorKind::Property, id, key, it->second, {}}, true, style));
  }

  if (budget > 0) {
    if (auto anchors = fg.anchor_map.find(id); anchors != fg.anchor_map.end()) {
      for (const auto& anchor : anchors->second) {
        for (auto& inner : build_impl(fg, anchor.neighbor, budget - 1, visited, style)) {
          Descriptor d;
          d.target = id;
          d.unique = inner.unique;
          d.hops = inner.hops + 1;
          d.deps = std::move(inner.deps);
          d.deps.push_back(Dependency{anchor.neighbor, anchor.label, id, inner.hops});
          d.kind = AnchorKind::Relation;
          d.relation_label = anchor.label;
          d.relation_node = anchor.neighbor;
          d.terminal = std::move(inner.terminal);
          d.text = wrap_relation(node.type, anchor.label, inner.text);
          out.push_back(std::move(d));
        }
      }
    }
  }

  if (!node.markers.empty()) {
    out.push_back(own_anchor(node, {AnchorKind::PointMarker, id, {}, {}, node.markers.front()}, true, style));
  }

  if (out.empty()) out.push_back(own_anchor(node, {AnchorKind::NonUnique, id, {}, {}, {}}, false, style));
  return out;
}

}  // namespace

std::vector<Descriptor> build_descriptors(const FrameGraph& fg, const NodeId& node, int hop_budget,
                                          const std::set<NodeId>& visited, const RenderStyle& style) {
  fg.at(node);  // unknown node -> NotFoundError
  if (hop_budget < 0) throw RangeError("hop budget must be non-negative");
  return build_impl(fg, node, hop_budget, visited, style);
}

std::map<NodeId, std::string> node_type_map(const FrameGraph& fg) {
  std::map<NodeId, std::string> types;
  for (const auto& n : fg.nodes) types.emplace(n.id, n.type);
  return types;
}

std::string render_descriptor(const Descriptor& d, const std::map<NodeId, std::string>& node_types,
                              const RenderStyle& style) {
  auto type_of = [&](const NodeId& id) -> std::string {
    auto it = node_types.find(id);
    return it == node_types.end() ? id : it->second;
  };
  std::string text = render_terminal(d.terminal, type_of(d.terminal.node), style);
  auto deps = d.deps;
  std::sort(deps.begin(), deps.end(),
            [](const Dependency& a, const Dependency& b) { return a.hop_depth < b.hop_depth; });
  for (const auto& dep : deps) text = wrap_relation(type_of(dep.downstream), dep.relation, text);
  return text;
}

std::optional<Descriptor> sample_descriptor(const std::vector<Descriptor>& candidates, Rng& rng, bool require_unique,
                                            std::optional<int> max_hops, const AnchorWeights& weights) {
  std::vector<const Descriptor*> eligible;
  for (const auto& c : candidates) {
    if (require_unique && !c.unique) continue;
    if (max_hops && c.hops > *max_hops) continue;
    eligible.push_back(&c);
  }
  if (eligible.empty()) return std::nullopt;
  if (weights.empty()) return *eligible[rng.uniform(eligible.size())];

  std::vector<double> w;
  double total = 0;
  for (const auto* c : eligible) {
    auto it = weights.find(c->kind);
    double v = it == weights.end() ? 1.0 : std::max(0.0, it->second);
    w.push_back(v);
    total += v;
  }
  if (total <= 0) return *eligible[rng.uniform(eligible.size())];
  double r = rng.unit() * total;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (r < w[i]) return *eligible[i];
    r -= w[i];
  }
  return *eligible.back();
}

const std::vector<Descriptor>& DescriptorIndex::candidates(const NodeId& node) const {
  auto it = cache_.find(node);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(node, build_descriptors(*fg_, node, hop_budget_, {}, style_)).first->second;
}

bool DescriptorIndex::has_unique(const NodeId& node) const {
  const auto& c = candidates(node);
  return std::any_of(c.begin(), c.end(), [&](const Descriptor& d) { return d.unique && d.hops <= hop_budget_; });
}

nlohmann::ordered_json descriptor_to_json(const Descriptor& d) {
  nlohmann::ordered_json out;
  out["text"] = d.text;
  out["target"] = d.target;
  out["unique"] = d.unique;
  out["hops"] = d.hops;
  out["anchor_kind"] = std::string(anchor_kind_name(d.kind));
  nlohmann::ordered_json anchor;
  anchor["kind"] = std::string(anchor_kind_name(d.terminal.kind));
  anchor["node"] = d.terminal.node;
  if (d.terminal.kind == AnchorKind::Property) {
    anchor["key"] = d.terminal.key;
    anchor["value"] = d.terminal.value;
  }
  if (d.terminal.marker) anchor["marker"] = marker_to_json(*d.terminal.marker);
  out["anchor"] = anchor;
  if (d.kind == AnchorKind::Relation) {
    out["relation"] = {{"label", d.relation_label}, {"node", d.relation_node}};
  }
  nlohmann::ordered_json deps = nlohmann::ordered_json::array();
  for (const auto& dep : d.deps) {
    deps.push_back(nlohmann::ordered_json{{"intermediate", dep.intermediate},
                                          {"relation", dep.relation},
                                          {"downstream", dep.downstream},
                                          {"hop_depth", dep.hop_depth}});
  }
  out["deps"] = deps;
  return out;
}

}  // namespace crs
