#pragma once

// Recursive construction of natural-language node references.
//
// A descriptor names one node either through one of its own anchors (unique
// type, unique property, image marker) or through a chain of unique outgoing
// edges ending in such an anchor: "the lane that contains the bus with
// number 54D". `deps` records every hop of that chain so the reasoning trace
// can later ground the innermost node first and walk back to the target.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/graph.hpp"
#include "crs/rng.hpp"

namespace crs {

enum class AnchorKind { NodeType, Property, Relation, PointMarker, NonUnique };

std::string_view anchor_kind_name(AnchorKind kind);

/// One hop of a relational descriptor: `intermediate` must be resolved first,
/// then `relation` (an outgoing edge of `downstream`) leads to `downstream`.
struct Dependency {
  NodeId intermediate;
  std::string relation;
  NodeId downstream;
  int hop_depth = 0;
  bool operator==(const Dependency&) const = default;
  auto operator<=>(const Dependency&) const = default;
};

/// The anchor at the innermost node of a descriptor chain.
struct TerminalAnchor {
  AnchorKind kind = AnchorKind::NonUnique;
  NodeId node;
  std::string key;    // Property
  std::string value;  // Property
  std::optional<CameraMarker> marker;
  bool operator==(const TerminalAnchor&) const = default;
};

struct Descriptor {
  std::string text;
  NodeId target;
  bool unique = false;
  int hops = 0;
  std::vector<Dependency> deps;  // innermost hop first
  AnchorKind kind = AnchorKind::NonUnique;
  std::string relation_label;  // kind == Relation: label of the outermost edge
  NodeId relation_node;        // kind == Relation: neighbour the edge leads to
  TerminalAnchor terminal;

  /// The node whose grounding starts a reasoning trace.
  const NodeId& anchor_node() const { return terminal.node; }
  bool operator==(const Descriptor&) const = default;
};

struct RenderStyle {
  /// Placeholders: {type} {key} {value}.
  std::string property_phrase = "the {type} whose {key} is {value}";
  std::string description_key = "description";

  static RenderStyle defaults() { return {}; }
};

/// "a" or "an" by the first letter of the following word.
std::string indefinite_article(std::string_view word);
/// "<point>(x,y)</point>" or "<box>(x1,y1,x2,y2)</box>", coordinates rounded half-up.
std::string render_marker(const CameraMarker& marker);
long round_half_up(double v);

/// Builds the full candidate cascade for `node` at the frame of `fg`.
/// Throws NotFoundError when the node is absent from the frame graph.
std::vector<Descriptor> build_descriptors(const FrameGraph& fg, const NodeId& node, int hop_budget,
                                          const std::set<NodeId>& visited = {},
                                          const RenderStyle& style = RenderStyle::defaults());

/// Deterministic text for a descriptor, using `node_types` to name nodes.
std::string render_descriptor(const Descriptor& d, const std::map<NodeId, std::string>& node_types,
                              const RenderStyle& style = RenderStyle::defaults());
std::map<NodeId, std::string> node_type_map(const FrameGraph& fg);

/// Optional per-anchor-kind sampling weights; empty means uniform.
using AnchorWeights = std::map<AnchorKind, double>;

std::optional<Descriptor> sample_descriptor(const std::vector<Descriptor>& candidates, Rng& rng, bool require_unique,
                                            std::optional<int> max_hops, const AnchorWeights& weights = {});

/// Lazily computed candidate sets for every node of one frame graph.
class DescriptorIndex {
 public:
  DescriptorIndex(const FrameGraph& fg, int hop_budget, RenderStyle style)
      : fg_(&fg), hop_budget_(hop_budget), style_(std::move(style)) {}

  const std::vector<Descriptor>& candidates(const NodeId& node) const;
  const FrameGraph& frame_graph() const { return *fg_; }
  int hop_budget() const { return hop_budget_; }
  const RenderStyle& style() const { return style_; }
  /// True when at least one unique candidate within the hop budget exists.
  bool has_unique(const NodeId& node) const;

 private:
  const FrameGraph* fg_;
  int hop_budget_;
  RenderStyle style_;
  mutable std::map<NodeId, std::vector<Descriptor>> cache_;
};

nlohmann::ordered_json descriptor_to_json(const Descriptor& d);

}  // namespace crs
