#pragma once

// The 19 query templates. Each one has an availability gate, a selector over
// the frame graph, question/answer renderers and a decoy generator.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/catalog.hpp"
#include "crs/descriptor.hpp"
#include "crs/graph.hpp"
#include "crs/rng.hpp"

namespace crs {

enum class TemplateId {
  CountingAtIntersectionPerDirection,
  CountingCrossing,
  CountingPerDirection,
  CountingGeneric,
  LaneDirection,
  LaneType,
  LineColor,
  TrafficLightStatus,
  LineMarking,
  LineType,
  CrossingType,
  TrafficLightChange,
  PairwiseLaneComparisonByDirection,
  PairwiseVehicleLocation,
  Pointing,
  ExistenceOfCrossings,
  SignControlsLane,
  TrafficLightControlsLane,
  VehiclePosition,
};

enum class Family { Counting, Property, Relation, Comparison, ExistencePointing, Temporal };
enum class Bucket { Counting, Properties, Comparison, Existence, Relational };
enum class ReasoningSplit { PerceptionLike, ReasoningHeavy };

std::string_view family_name(Family f);
std::string_view bucket_name(Bucket b);
std::string_view split_name(ReasoningSplit s);

struct QueryTemplate {
  TemplateId id;
  std::string_view name;
  Family family;
  Bucket bucket;
  ReasoningSplit split;
  std::vector<std::string> completeness_roles;  // catalog type roles needing c_t = 1
  int traversals = 0;                           // graph relations the template itself walks
};

/// All templates in a fixed order.
const std::vector<QueryTemplate>& all_templates();
const QueryTemplate& template_info(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);

/// Node types whose completeness flag the template needs at the queried frame.
std::vector<std::string> completeness_types(const QueryTemplate& tpl, const Catalog& catalog);

struct TargetSelection {
  TemplateId template_id;
  std::vector<NodeId> nodes;         // referenced in the question, in mention order
  std::vector<NodeId> answer_nodes;  // answer side: lanes, counted items, grounded crossing
  std::map<std::string, std::string> bindings;

  /// Stable identity used for ordering and for the emission cap.
  std::string key() const;
};

enum class DecoySource { PerturbedValue, AlternateDescriptor, NoneOfTheAbove };
std::string_view decoy_source_name(DecoySource s);

struct Decoy {
  std::string text;
  DecoySource source = DecoySource::PerturbedValue;
  std::vector<int> counts;  // counting templates only
};

struct NamedDescriptor {
  std::string role;  // "d", "d1", "d2", "answer"
  Descriptor descriptor;
};

struct SamplePlan {
  TemplateId template_id;
  std::string scene_id;
  Frame frame = 0;
  std::vector<Frame> window;
  std::vector<NodeId> target_nodes;
  TargetSelection selection;
  std::size_t selection_index = 0;

  std::vector<NamedDescriptor> question_descriptors;  // question-mention order
  std::vector<NamedDescriptor> answer_descriptors;
  std::string question;
  std::string answer_text;  // Ta applied to the true graph
  std::map<std::string, std::string> facts;
  std::vector<int> answer_counts;

  std::string correct_option;  // answer_text, or the none-of-the-above text
  bool correct_is_nota = false;
  std::vector<Decoy> decoys;

  int reasoning_depth = 0;
  int traversals = 0;
  std::uint64_t rng_seed = 0;
};

struct PlanConfig {
  int hop_cap = 2;
  int window = 4;
  int option_count = 4;
  double nota_decoy_probability = 0.15;
  double nota_correct_probability = 0.05;
  AnchorWeights weights;
  /// Forces a descriptor with this exact text for a node, when it is a candidate.
  std::map<NodeId, std::string> prefer_text;

  static PlanConfig from_catalog(const Catalog& catalog);
};

struct PlanContext {
  const SceneGraph& graph;
  const FrameGraph& fg;
  const Catalog& catalog;
  PlanConfig config;
};

bool availability(const QueryTemplate& tpl, const SceneGraph& graph, Frame t, const Catalog& catalog,
                  int window = 4);
bool availability(const QueryTemplate& tpl, const SceneGraph& graph, const FrameGraph& fg, const Catalog& catalog,
                  int window = 4);

/// All selections in deterministic graph order. The window only matters for
/// the temporal template.
std::vector<TargetSelection> select(const QueryTemplate& tpl, const SceneGraph& graph, const FrameGraph& fg,
                                    const Catalog& catalog, int window = 4);

struct PlanOutcome {
  std::optional<SamplePlan> plan;
  std::string rejection;
};

PlanOutcome plan(const QueryTemplate& tpl, const PlanContext& ctx, const TargetSelection& selection,
                 std::size_t selection_index, Rng& rng);

/// Nodes a descriptor for `node` may not pass through, and anchor keys it may
/// not use, so the question never gives the answer away.
struct DescriptorRestriction {
  std::set<NodeId> excluded_nodes;
  std::set<std::string> excluded_keys;  // property anchors on the target itself
  bool allow_point_marker = true;
};
DescriptorRestriction restriction_for(const QueryTemplate& tpl, const TargetSelection& selection,
                                      const NodeId& node, const Catalog& catalog);

/// Unique candidates of `node` within the hop cap that satisfy `r`.
std::vector<Descriptor> usable_descriptors(const FrameGraph& fg, const NodeId& node, int hop_cap,
                                           const DescriptorRestriction& r, const RenderStyle& style);

/// Returns k decoys, or nullopt when fewer than k distinct ones exist. The
/// none-of-the-above text is never produced here.
std::optional<std::vector<Decoy>> perturb(const QueryTemplate& tpl, const PlanContext& ctx,
                                          const TargetSelection& selection, const SamplePlan& answer, Rng& rng,
                                          std::size_t k);

/// Sum of hops over distinct question/answer descriptors plus template traversals.
int compute_reasoning_depth(const SamplePlan& plan);

nlohmann::ordered_json plan_to_json(const SamplePlan& plan);

}  // namespace crs
