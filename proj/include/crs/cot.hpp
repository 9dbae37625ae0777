#pragma once

// Deterministic reasoning traces: ground the innermost anchor, walk the
// descriptor chain back to the target, add a few auxiliary facts, then state
// the answer-bearing value.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/catalog.hpp"
#include "crs/graph.hpp"
#include "crs/rng.hpp"
#include "crs/templates.hpp"

namespace crs {

/// "LEFT and CENTER view at <box>(...)</box>", or "" for an ungrounded node.
std::string render_grounding(const NodeId& node, const FrameGraph& fg);

struct CoTStep {
  std::string label;  // "Step 1:"
  std::string kind;   // anchor, traverse, fact, scope, enumerate, aggregate, extract, compare
  std::string text;
  std::vector<NodeId> nodes;
};

struct GroundedMarker {
  std::size_t step = 0;
  NodeId node;
  CameraMarker marker;
};

struct CoTTrace {
  std::vector<CoTStep> steps;
  std::string conclusion;
  std::vector<GroundedMarker> grounded_markers;

  std::string text() const;
};

struct FactBudget {
  int properties = 1;
  int relations = 1;
  int neighbor_properties = 1;

  static FactBudget from_catalog(const Catalog& catalog);
};

CoTTrace build_cot(const SamplePlan& plan, const FrameGraph& fg, const Catalog& catalog, Rng& rng,
                   const FactBudget& budget = {});

nlohmann::ordered_json cot_to_json(const CoTTrace& trace);

}  // namespace crs
