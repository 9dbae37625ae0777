#include "crs/templates.hpp"

#include <algorithm>

#include "crs/cot.hpp"
#include "crs/error.hpp"
#include "crs/graph_io.hpp"
#include "crs/text.hpp"

namespace crs {

using T = TemplateId;

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Counting:
      return "counting";
    case Family::Property:
      return "property";
    case Family::Relation:
      return "relation";
    case Family::Comparison:
      return "comparison";
    case Family::ExistencePointing:
      return "existence_pointing";
    case Family::Temporal:
      return "temporal";
  }
  return "property";
}

std::string_view bucket_name(Bucket b) {
  switch (b) {
    case Bucket::Counting:
      return "Counting";
    case Bucket::Properties:
      return "Properties";
    case Bucket::Comparison:
      return "Comparison";
    case Bucket::Existence:
      return "Existence";
    case Bucket::Relational:
      return "Relational";
  }
  return "Properties";
}

std::string_view split_name(ReasoningSplit s) {
  return s == ReasoningSplit::PerceptionLike ? "perception_like" : "reasoning_heavy";
}

std::string_view decoy_source_name(DecoySource s) {
  switch (s) {
    case DecoySource::PerturbedValue:
      return "perturbed_value";
    case DecoySource::AlternateDescriptor:
      return "alternate_descriptor";
    case DecoySource::NoneOfTheAbove:
      return "none_of_the_above";
  }
  return "perturbed_value";
}

const std::vector<QueryTemplate>& all_templates() {
  using F = Family;
  using B = Bucket;
  constexpr auto low = ReasoningSplit::PerceptionLike;
  constexpr auto high = ReasoningSplit::ReasoningHeavy;
  static const std::vector<QueryTemplate> table = {
      {T::CountingAtIntersectionPerDirection, "counting_at_intersection_per_direction", F::Counting, B::Counting, low,
       {"lane"}, 1},
      {T::CountingCrossing, "counting_crossing", F::Counting, B::Counting, low, {"crossing"}, 0},
      {T::CountingPerDirection, "counting_per_direction", F::Counting, B::Counting, low, {"lane"}, 0},
      {T::CountingGeneric, "counting_generic", F::Counting, B::Counting, low, {"lane"}, 0},
      {T::LaneDirection, "lane_direction", F::Property, B::Properties, low, {}, 0},
      {T::LaneType, "lane_type", F::Property, B::Properties, low, {}, 0},
      {T::LineColor, "line_color", F::Property, B::Properties, low, {}, 1},
      {T::TrafficLightStatus, "traffic_light_status", F::Property, B::Properties, low, {}, 0},
      {T::LineMarking, "line_marking", F::Property, B::Properties, low, {}, 1},
      {T::LineType, "line_type", F::Property, B::Properties, low, {}, 1},
      {T::CrossingType, "crossing_type", F::Property, B::Properties, low, {}, 0},
      {T::TrafficLightChange, "traffic_light_change", F::Temporal, B::Properties, low, {}, 0},
      {T::PairwiseLaneComparisonByDirection, "pairwise_lane_comparison_by_direction", F::Comparison, B::Comparison,
       low, {}, 0},
      {T::PairwiseVehicleLocation, "pairwise_vehicle_location", F::Comparison, B::Comparison, high, {}, 2},
      {T::Pointing, "pointing", F::ExistencePointing, B::Existence, high, {}, 0},
      {T::ExistenceOfCrossings, "existence_of_crossings", F::ExistencePointing, B::Existence, high, {"crossing"}, 1},
      {T::SignControlsLane, "sign_controls_lane", F::Relation, B::Relational, high, {}, 1},
      {T::TrafficLightControlsLane, "traffic_light_controls_lane", F::Relation, B::Relational, high, {}, 1},
      {T::VehiclePosition, "vehicle_position", F::Relation, B::Relational, high, {}, 1},
  };
  return table;
}

const QueryTemplate& template_info(TemplateId id) {
  for (const auto& t : all_templates()) {
    if (t.id == id) return t;
  }
  throw NotFoundError("unknown template id");
}

std::optional<TemplateId> parse_template_id(std::string_view name) {
  for (const auto& t : all_templates()) {
    if (t.name == name) return t.id;
  }
  return std::nullopt;
}

std::vector<std::string> completeness_types(const QueryTemplate& tpl, const Catalog& catalog) {
  std::vector<std::string> out;
  for (const auto& role : tpl.completeness_roles) out.push_back(catalog.type(role));
  return out;
}

std::string TargetSelection::key() const {
  std::string out(template_info(template_id).name);
  out += "|";
  for (std::size_t i = 0; i < nodes.size(); ++i) out += (i ? "," : "") + nodes[i];
  out += "|";
  for (std::size_t i = 0; i < answer_nodes.size(); ++i) out += (i ? "," : "") + answer_nodes[i];
  for (const auto& [k, v] : bindings) out += "|" + k + "=" + v;
  return out;
}

PlanConfig PlanConfig::from_catalog(const Catalog& catalog) {
  PlanConfig c;
  c.option_count = catalog.option_count;
  c.nota_decoy_probability = catalog.nota_decoy_probability;
  c.nota_correct_probability = catalog.nota_correct_probability;
  return c;
}

namespace {

// ---------------------------------------------------------------------------
// Frame-graph queries

std::vector<const FrameNode*> nodes_of(const FrameGraph& fg, const std::string& type) { return fg.of_type(type); }

std::vector<NodeId> targets_via(const FrameGraph& fg, const NodeId& source, const std::string& label,
                                const std::string& target_type) {
  std::vector<NodeId> out;
  for (const auto* e : fg.outgoing(source)) {
    if (e->label != label) continue;
    const auto* t = fg.find(e->target);
    if (t && t->type == target_type && std::find(out.begin(), out.end(), t->id) == out.end()) out.push_back(t->id);
  }
  return out;
}

std::vector<NodeId> sources_via(const FrameGraph& fg, const NodeId& target, const std::string& label,
                                const std::string& source_type) {
  std::vector<NodeId> out;
  for (const auto* e : fg.incoming(target)) {
    if (e->label != label) continue;
    const auto* s = fg.find(e->source);
    if (s && s->type == source_type && std::find(out.begin(), out.end(), s->id) == out.end()) out.push_back(s->id);
  }
  return out;
}

bool has_edge(const FrameGraph& fg, const NodeId& a, const std::string& label, const NodeId& b) {
  for (const auto* e : fg.outgoing(a)) {
    if (e->label == label && e->target == b) return true;
  }
  return false;
}

std::string prop(const FrameNode& n, const std::string& key) {
  auto it = n.properties.find(key);
  return it == n.properties.end() ? std::string{} : it->second;
}

/// Sorts ids by their position in the frame graph.
void graph_order(const FrameGraph& fg, std::vector<NodeId>& ids) {
  std::map<NodeId, std::size_t> pos;
  for (std::size_t i = 0; i < fg.nodes.size(); ++i) pos[fg.nodes[i].id] = i;
  std::sort(ids.begin(), ids.end(), [&](const NodeId& a, const NodeId& b) { return pos[a] < pos[b]; });
}

std::vector<const FrameNode*> actors(const FrameGraph& fg, const Catalog& catalog) {
  std::vector<const FrameNode*> out;
  for (const auto& n : fg.nodes) {
    if (catalog.is_actor(n.type)) out.push_back(&n);
  }
  return out;
}

std::optional<NodeId> single_lane_of(const FrameGraph& fg, const NodeId& actor, const Catalog& catalog) {
  auto lanes = targets_via(fg, actor, catalog.label("is_in"), catalog.type("lane"));
  if (lanes.size() != 1) return std::nullopt;
  return lanes.front();
}

bool in_intersection(const FrameGraph& fg, const NodeId& lane, const Catalog& catalog) {
  return !targets_via(fg, lane, catalog.label("is_in"), catalog.type("intersection")).empty();
}

/// Relative position of lane a with respect to lane b.
std::string lane_relation(const FrameGraph& fg, const NodeId& a, const NodeId& b, const Catalog& catalog) {
  if (a == b) return "same";
  const auto& left = catalog.label("left_of");
  const auto& right = catalog.label("right_of");
  if (has_edge(fg, a, right, b) || has_edge(fg, b, left, a)) return "right";
  if (has_edge(fg, a, left, b) || has_edge(fg, b, right, a)) return "left";
  return "apart";
}

std::string line_side(const std::string& label, const Catalog& catalog) {
  if (label == catalog.label("left_marking")) return "left";
  if (label == catalog.label("right_marking")) return "right";
  return {};
}

std::string count_phrase(int n, const TemplateStrings& ts) {
  return std::to_string(n) + " " + (n == 1 ? ts.str("noun_one") : ts.str("noun_many"));
}

std::string be(int n) { return n == 1 ? "is" : "are"; }

std::string tname(TemplateId id) { return std::string(template_info(id).name); }

// ---------------------------------------------------------------------------
// Answer rendering shared by plan and perturb

std::string render_counts(TemplateId id, const std::vector<int>& counts, const TemplateStrings& ts,
                          const std::map<std::string, std::string>& facts) {
  switch (id) {
    case T::CountingGeneric:
      if (counts.size() == 2) {
        return format_template(ts.str("answer_split"), {{"be", be(counts[0])},
                                                        {"opposite", count_phrase(counts[0], ts)},
                                                        {"same", count_phrase(counts[1], ts)}});
      }
      return format_template(ts.str("answer_total"), {{"be", be(counts[0])}, {"total", count_phrase(counts[0], ts)}});
    case T::CountingPerDirection:
      return format_template(ts.str("answer"), {{"be", be(counts[0])},
                                                {"count", count_phrase(counts[0], ts)},
                                                {"direction", facts.at("direction_phrase")}});
    case T::CountingAtIntersectionPerDirection:
      return format_template(ts.str("answer"), {{"be", be(counts[0])},
                                                {"approach", count_phrase(counts[0], ts)},
                                                {"exit", count_phrase(counts[1], ts)}});
    default:
      return format_template(ts.str("answer"), {{"be", be(counts[0])}, {"count", count_phrase(counts[0], ts)}});
  }
}

std::string render_direction_pair(const std::string& v1, const std::string& v2, const Catalog& catalog,
                                  const TemplateStrings& ts) {
  auto phrase = [&](const std::string& v) {
    auto it = catalog.direction_phrases.find(v);
    return it == catalog.direction_phrases.end() ? v : it->second;
  };
  if (v1 == v2) return format_template(ts.str("answer_same"), {{"direction1", phrase(v1)}});
  return format_template(ts.str("answer_different"), {{"direction1", phrase(v1)}, {"direction2", phrase(v2)}});
}

std::string render_vehicle_relation(const std::string& rel, const std::string& a1, const std::string& a2,
                                    const TemplateStrings& ts) {
  if (rel == "same") return ts.str("answer_same");
  if (rel == "left") return format_template(ts.str("answer_left"), {{"a1", a1}, {"a2", a2}});
  if (rel == "right") return format_template(ts.str("answer_right"), {{"a1", a1}, {"a2", a2}});
  return ts.str("answer_apart");
}

std::string render_existence(const std::string& outcome, const std::string& value, const Catalog& catalog,
                             const TemplateStrings& ts) {
  if (outcome == "yes_style") return format_template(ts.str("answer_yes_style"), {{"style", value}});
  if (outcome == "yes_unmarked") return ts.str("answer_yes_unmarked");
  if (outcome == "no_other") {
    auto it = catalog.side_phrases.find(value);
    return format_template(ts.str("answer_no_other"),
                           {{"other_side", it == catalog.side_phrases.end() ? value : it->second}});
  }
  return ts.str("answer_no");
}

std::string render_lane_set(const std::vector<std::string>& texts, const TemplateStrings& ts) {
  return format_template(ts.str("answer"), {{"lanes", capitalize_first(join_and(texts))}});
}

bool is_property_template(TemplateId id) {
  switch (id) {
    case T::LaneDirection:
    case T::LaneType:
    case T::TrafficLightStatus:
    case T::CrossingType:
      return true;
    default:
      return false;
  }
}

bool is_line_template(TemplateId id) { return id == T::LineColor || id == T::LineMarking || id == T::LineType; }

std::string property_target_type(TemplateId id, const Catalog& catalog) {
  switch (id) {
    case T::LaneDirection:
    case T::LaneType:
      return catalog.type("lane");
    case T::TrafficLightStatus:
    case T::TrafficLightChange:
      return catalog.type("traffic_light");
    case T::CrossingType:
      return catalog.type("crossing");
    default:
      return catalog.type("lane_line");
  }
}

// ---------------------------------------------------------------------------
// Decoy pools: tiers of candidates, harder negatives first

using Tiers = std::vector<std::vector<Decoy>>;

std::vector<std::vector<int>> count_variants(const std::vector<int>& c, int tier) {
  std::vector<std::vector<int>> deltas;
  if (c.size() == 1) {
    if (tier == 0) deltas = {{1}, {-1}};
    if (tier == 1) deltas = {{2}, {-2}};
    if (tier == 2) deltas = {{3}, {4}};
  } else {
    if (tier == 0) deltas = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}};
    if (tier == 1) deltas = {{2, 0}, {-2, 0}, {0, 2}, {0, -2}, {1, 1}, {-1, -1}};
    if (tier == 2) deltas = {{3, 0}, {0, 3}, {4, 0}, {0, 4}};
  }
  std::vector<std::vector<int>> out;
  for (const auto& d : deltas) {
    std::vector<int> v = c;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] += d[i];
      if (v[i] < 0) ok = false;
    }
    if (ok && v != c) out.push_back(v);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Descriptor restrictions

DescriptorRestriction restriction_for(const QueryTemplate& tpl, const TargetSelection& sel, const NodeId& node,
                                      const Catalog& catalog) {
  DescriptorRestriction r;
  bool question_side = std::find(sel.nodes.begin(), sel.nodes.end(), node) != sel.nodes.end();
  auto binding = [&](const char* k) {
    auto it = sel.bindings.find(k);
    return it == sel.bindings.end() ? std::string{} : it->second;
  };
  switch (tpl.id) {
    case T::LaneDirection:
    case T::LaneType:
    case T::TrafficLightStatus:
    case T::CrossingType:
    case T::TrafficLightChange:
      r.excluded_keys.insert(binding("key"));
      break;
    case T::LineColor:
    case T::LineMarking:
    case T::LineType:
      r.excluded_nodes.insert(sel.answer_nodes.begin(), sel.answer_nodes.end());
      break;
    case T::PairwiseLaneComparisonByDirection:
      r.excluded_keys.insert(catalog.tpl("lane_direction").property_key);
      break;
    case T::PairwiseVehicleLocation:
      r.excluded_nodes.insert(sel.answer_nodes.begin(), sel.answer_nodes.end());
      for (const auto& n : sel.nodes) {
        if (n != node) r.excluded_nodes.insert(n);
      }
      break;
    case T::Pointing:
      r.allow_point_marker = false;
      break;
    case T::ExistenceOfCrossings:
    case T::CountingAtIntersectionPerDirection:
      r.excluded_nodes.insert(sel.answer_nodes.begin(), sel.answer_nodes.end());
      break;
    case T::SignControlsLane:
    case T::TrafficLightControlsLane:
    case T::VehiclePosition:
      if (question_side) {
        r.excluded_nodes.insert(sel.answer_nodes.begin(), sel.answer_nodes.end());
      } else {
        r.excluded_nodes.insert(sel.nodes.begin(), sel.nodes.end());
      }
      break;
    default:
      break;
  }
  r.excluded_nodes.erase(node);
  r.excluded_keys.erase(std::string{});
  return r;
}

std::vector<Descriptor> usable_descriptors(const FrameGraph& fg, const NodeId& node, int hop_cap,
                                           const DescriptorRestriction& r, const RenderStyle& style) {
  std::vector<Descriptor> out;
  for (auto& d : build_descriptors(fg, node, hop_cap, r.excluded_nodes, style)) {
    if (!d.unique || d.hops > hop_cap) continue;
    bool on_target = d.terminal.node == node;
    if (on_target && d.terminal.kind == AnchorKind::Property && r.excluded_keys.count(d.terminal.key)) continue;
    if (on_target && d.terminal.kind == AnchorKind::PointMarker && !r.allow_point_marker) continue;
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Availability and selection

std::vector<TargetSelection> select(const QueryTemplate& tpl, const SceneGraph& graph, const FrameGraph& fg,
                                    const Catalog& catalog, int window) {
  std::vector<TargetSelection> out;
  auto make = [&](std::vector<NodeId> nodes, std::vector<NodeId> answer_nodes,
                  std::map<std::string, std::string> bindings) {
    out.push_back(TargetSelection{tpl.id, std::move(nodes), std::move(answer_nodes), std::move(bindings)});
  };
  const auto& lane = catalog.type("lane");

  switch (tpl.id) {
    case T::LaneDirection:
    case T::LaneType:
    case T::TrafficLightStatus:
    case T::CrossingType: {
      const auto& key = catalog.tpl(tname(tpl.id)).property_key;
      for (const auto* n : nodes_of(fg, property_target_type(tpl.id, catalog))) {
        if (n->properties.count(key)) make({n->id}, {}, {{"key", key}, {"value", prop(*n, key)}});
      }
      break;
    }
    case T::LineColor:
    case T::LineMarking:
    case T::LineType: {
      const auto& key = catalog.tpl(tname(tpl.id)).property_key;
      for (const auto* line : nodes_of(fg, catalog.type("lane_line"))) {
        if (!line->properties.count(key)) continue;
        for (const auto* e : fg.outgoing(line->id)) {
          auto side = line_side(e->label, catalog);
          const auto* target = fg.find(e->target);
          if (side.empty() || !target || target->type != lane) continue;
          // The question must name exactly one line.
          if (sources_via(fg, target->id, e->label, line->type).size() != 1) continue;
          make({target->id}, {line->id}, {{"key", key}, {"value", prop(*line, key)}, {"side", side}});
        }
      }
      break;
    }
    case T::TrafficLightChange: {
      Frame t = fg.frame;
      Frame start = t - window + 1;
      if (window < 1 || start < graph.frame_range.first) break;
      const auto& ts = catalog.tpl(tname(tpl.id));
      const auto& key = ts.property_key;
      for (const auto* n : nodes_of(fg, catalog.type("traffic_light"))) {
        const auto* node = graph.find_node(n->id);
        auto it = node->properties.find(key);
        if (it == node->properties.end()) continue;
        auto first = it->second.at(start);
        auto last = it->second.at(t);
        if (!first || !last) continue;
        std::vector<std::string> series;
        for (Frame f = start; f <= t; ++f) series.push_back(it->second.at(f).value_or(ts.str("unknown_value")));
        std::string joined;
        for (std::size_t i = 0; i < series.size(); ++i) joined += (i ? ", " : "") + series[i];
        make({n->id}, {}, {{"key", key}, {"first", *first}, {"last", *last}, {"series", joined},
                           {"window_start", std::to_string(start)}});
      }
      break;
    }
    case T::CountingGeneric: {
      std::vector<NodeId> lanes;
      for (const auto* n : nodes_of(fg, lane)) lanes.push_back(n->id);
      make({}, lanes, {});
      break;
    }
    case T::CountingPerDirection: {
      const auto& dkey = catalog.tpl("lane_direction").property_key;
      for (const char* role : {"same", "opposite"}) {
        const auto& value = catalog.direction_values.at(role);
        std::vector<NodeId> lanes;
        for (const auto* n : nodes_of(fg, lane)) {
          if (prop(*n, dkey) == value && !in_intersection(fg, n->id, catalog)) lanes.push_back(n->id);
        }
        make({}, lanes, {{"direction", value}});
      }
      break;
    }
    case T::CountingAtIntersectionPerDirection: {
      for (const auto* x : nodes_of(fg, catalog.type("intersection"))) {
        auto approach = sources_via(fg, x->id, catalog.label("leads_up_to"), lane);
        auto exit = sources_via(fg, x->id, catalog.label("leaves"), lane);
        std::vector<NodeId> all = approach;
        all.insert(all.end(), exit.begin(), exit.end());
        make({x->id}, all,
             {{"approach", std::to_string(approach.size())}, {"exit", std::to_string(exit.size())}});
      }
      break;
    }
    case T::CountingCrossing: {
      std::vector<NodeId> crossings;
      for (const auto* n : nodes_of(fg, catalog.type("crossing"))) crossings.push_back(n->id);
      make({}, crossings, {});
      break;
    }
    case T::PairwiseLaneComparisonByDirection: {
      const auto& dkey = catalog.tpl("lane_direction").property_key;
      std::vector<const FrameNode*> lanes;
      for (const auto* n : nodes_of(fg, lane)) {
        if (catalog.direction_phrases.count(prop(*n, dkey))) lanes.push_back(n);
      }
      for (std::size_t i = 0; i < lanes.size(); ++i) {
        for (std::size_t j = i + 1; j < lanes.size(); ++j) {
          make({lanes[i]->id, lanes[j]->id}, {},
               {{"value1", prop(*lanes[i], dkey)}, {"value2", prop(*lanes[j], dkey)}});
        }
      }
      break;
    }
    case T::PairwiseVehicleLocation: {
      std::vector<std::pair<const FrameNode*, NodeId>> placed;
      for (const auto* a : actors(fg, catalog)) {
        if (auto l = single_lane_of(fg, a->id, catalog)) placed.emplace_back(a, *l);
      }
      for (std::size_t i = 0; i < placed.size(); ++i) {
        for (std::size_t j = i + 1; j < placed.size(); ++j) {
          const auto& [a, la] = placed[i];
          const auto& [b, lb] = placed[j];
          std::vector<NodeId> lanes = {la};
          if (lb != la) lanes.push_back(lb);
          make({a->id, b->id}, lanes, {{"relation", lane_relation(fg, la, lb, catalog)}});
        }
      }
      break;
    }
    case T::Pointing: {
      for (const auto& n : fg.nodes) {
        if (!n.markers.empty()) make({n.id}, {}, {});
      }
      break;
    }
    case T::ExistenceOfCrossings: {
      const auto& ts = catalog.tpl(tname(tpl.id));
      const auto& style_key = catalog.tpl("crossing_type").property_key;
      for (const auto* x : nodes_of(fg, catalog.type("intersection"))) {
        auto crossings = sources_via(fg, x->id, catalog.label("is_on"), catalog.type("crossing"));
        for (const auto& [side, phrase] : catalog.side_phrases) {
          const FrameNode* match = nullptr;
          const FrameNode* other = nullptr;
          for (const auto& id : crossings) {
            const auto& c = fg.at(id);
            auto s = prop(c, "side");
            if (s == side && !match) match = &c;
            if (s != side && !s.empty() && catalog.side_phrases.count(s) && !other) other = &c;
          }
          std::map<std::string, std::string> b{{"side", side}};
          std::vector<NodeId> answer;
          if (match) {
            auto style = prop(*match, style_key);
            bool unmarked = style.empty() || style == ts.str("unmarked_value");
            b["outcome"] = unmarked ? "yes_unmarked" : "yes_style";
            b["style"] = unmarked ? ts.str("unmarked_value") : style;
            answer.push_back(match->id);
          } else if (other) {
            b["outcome"] = "no_other";
            b["other_side"] = prop(*other, "side");
            answer.push_back(other->id);
          } else {
            b["outcome"] = "no";
          }
          make({x->id}, answer, b);
        }
      }
      break;
    }
    case T::SignControlsLane:
    case T::TrafficLightControlsLane: {
      auto type = catalog.type(tpl.id == T::SignControlsLane ? "sign" : "traffic_light");
      for (const auto* c : nodes_of(fg, type)) {
        auto lanes = targets_via(fg, c->id, catalog.label("controls"), lane);
        if (lanes.empty()) continue;
        graph_order(fg, lanes);
        make({c->id}, lanes, {});
      }
      break;
    }
    case T::VehiclePosition: {
      for (const auto* a : actors(fg, catalog)) {
        if (auto l = single_lane_of(fg, a->id, catalog)) make({a->id}, {*l}, {});
      }
      break;
    }
  }
  return out;
}

bool availability(const QueryTemplate& tpl, const SceneGraph& graph, const FrameGraph& fg, const Catalog& catalog,
                  int window) {
  for (const auto& type : completeness_types(tpl, catalog)) {
    if (!is_complete(graph, fg.frame, type)) return false;
  }
  return !select(tpl, graph, fg, catalog, window).empty();
}

bool availability(const QueryTemplate& tpl, const SceneGraph& graph, Frame t, const Catalog& catalog, int window) {
  return availability(tpl, graph, frame_view(graph, t), catalog, window);
}

// ---------------------------------------------------------------------------
// Planning

namespace {

std::optional<Descriptor> choose(const std::vector<Descriptor>& usable, const NodeId& node, const PlanConfig& cfg,
                                 Rng& rng) {
  if (auto it = cfg.prefer_text.find(node); it != cfg.prefer_text.end()) {
    for (const auto& d : usable) {
      if (d.text == it->second) return d;
    }
  }
  return sample_descriptor(usable, rng, true, cfg.hop_cap, cfg.weights);
}

std::optional<Descriptor> describe(const QueryTemplate& tpl, const PlanContext& ctx, const TargetSelection& sel,
                                   const NodeId& node, Rng& rng) {
  auto usable = usable_descriptors(ctx.fg, node, ctx.config.hop_cap, restriction_for(tpl, sel, node, ctx.catalog),
                                   ctx.catalog.render);
  return choose(usable, node, ctx.config, rng);
}

/// Draws `k` distinct decoys, tier by tier, skipping anything equal to the
/// answer, the none-of-the-above text or an earlier pick.
std::optional<std::vector<Decoy>> take(Tiers tiers, const std::string& answer, const std::string& nota, Rng& rng,
                                       std::size_t k) {
  std::vector<Decoy> out;
  std::set<std::string> seen{answer, nota};
  for (auto& tier : tiers) {
    rng.shuffle(tier);
    for (auto& d : tier) {
      if (out.size() == k) break;
      if (!seen.insert(d.text).second) continue;
      out.push_back(std::move(d));
    }
  }
  if (out.size() < k) return std::nullopt;
  return out;
}

Tiers decoy_tiers(const QueryTemplate& tpl, const PlanContext& ctx, const TargetSelection& sel,
                  const SamplePlan& p, Rng& rng) {
  const auto& catalog = ctx.catalog;
  const auto& fg = ctx.fg;
  const auto& ts = catalog.tpl(tname(tpl.id));
  Tiers tiers(3);
  auto value_decoy = [](std::string text) { return Decoy{std::move(text), DecoySource::PerturbedValue, {}}; };

  switch (tpl.id) {
    case T::LaneDirection:
    case T::LaneType:
    case T::TrafficLightStatus:
    case T::CrossingType:
    case T::LineColor:
    case T::LineMarking:
    case T::LineType:
      for (const auto& v : ts.vocabulary) {
        if (v != p.facts.at("value")) tiers[0].push_back(value_decoy(format_template(ts.str("answer"), {{"value", v}})));
      }
      for (const auto& extra : ts.extra_decoys) tiers[0].push_back(value_decoy(extra));
      break;
    case T::TrafficLightChange: {
      const auto& first = p.facts.at("first");
      const auto& last = p.facts.at("last");
      std::vector<std::string> values = ts.vocabulary;
      for (const auto& v : {first, last}) {
        if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
      }
      auto constant = [&](const std::string& v) { return format_template(ts.str("answer_constant"), {{"last", v}}); };
      auto changed = [&](const std::string& a, const std::string& b) {
        return format_template(ts.str("answer_changed"), {{"first", a}, {"last", b}});
      };
      for (const auto& a : values) {
        bool near = a == first || a == last;
        tiers[near ? 0 : 1].push_back(value_decoy(constant(a)));
        for (const auto& b : values) {
          if (a == b) continue;
          bool close = (a == first || a == last) && (b == first || b == last || first == last);
          tiers[close ? 0 : 1].push_back(value_decoy(changed(a, b)));
        }
      }
      break;
    }
    case T::CountingGeneric:
    case T::CountingPerDirection:
    case T::CountingAtIntersectionPerDirection:
    case T::CountingCrossing:
      for (int tier = 0; tier < 3; ++tier) {
        for (const auto& c : count_variants(p.answer_counts, tier)) {
          tiers[tier].push_back(Decoy{render_counts(tpl.id, c, ts, p.facts), DecoySource::PerturbedValue, c});
        }
      }
      break;
    case T::PairwiseLaneComparisonByDirection: {
      const auto& v1 = p.facts.at("value1");
      const auto& v2 = p.facts.at("value2");
      for (const auto& [a, pa] : catalog.direction_phrases) {
        for (const auto& [b, pb] : catalog.direction_phrases) {
          bool near = (a == v1 || a == v2) && (b == v1 || b == v2);
          tiers[near ? 0 : 1].push_back(value_decoy(render_direction_pair(a, b, catalog, ts)));
        }
      }
      break;
    }
    case T::PairwiseVehicleLocation: {
      const auto& a1 = p.question_descriptors.at(0).descriptor.text;
      const auto& a2 = p.question_descriptors.at(1).descriptor.text;
      for (const char* rel : {"same", "left", "right", "apart"}) {
        tiers[0].push_back(value_decoy(render_vehicle_relation(rel, a1, a2, ts)));
      }
      break;
    }
    case T::Pointing: {
      const auto& target = fg.at(sel.nodes.front());
      for (const auto& n : fg.nodes) {
        if (n.id == target.id || n.markers.empty()) continue;
        auto text = format_template(ts.str("answer"), {{"grounding", render_grounding(n.id, fg)}});
        tiers[n.type == target.type ? 0 : 1].push_back(Decoy{text, DecoySource::AlternateDescriptor, {}});
      }
      break;
    }
    case T::ExistenceOfCrossings: {
      const auto& side = sel.bindings.at("side");
      for (const auto& style : catalog.tpl("crossing_type").vocabulary) {
        auto outcome = style == ts.str("unmarked_value") ? "yes_unmarked" : "yes_style";
        tiers[0].push_back(value_decoy(render_existence(outcome, style, catalog, ts)));
      }
      for (const auto& [other, phrase] : catalog.side_phrases) {
        if (other != side) tiers[0].push_back(value_decoy(render_existence("no_other", other, catalog, ts)));
      }
      tiers[0].push_back(value_decoy(render_existence("no", {}, catalog, ts)));
      break;
    }
    case T::SignControlsLane:
    case T::TrafficLightControlsLane:
    case T::VehiclePosition: {
      // Real lanes that are not part of the answer, rendered the same way.
      std::map<NodeId, std::string> text;
      for (const auto& nd : p.answer_descriptors) text[nd.descriptor.target] = nd.descriptor.text;
      std::vector<NodeId> others;
      for (const auto* n : nodes_of(fg, catalog.type("lane"))) {
        if (text.count(n->id)) continue;
        if (auto d = describe(tpl, ctx, sel, n->id, rng)) {
          text[n->id] = d->text;
          others.push_back(n->id);
        }
      }
      auto render = [&](std::vector<NodeId> set) {
        graph_order(fg, set);
        std::vector<std::string> parts;
        for (const auto& id : set) parts.push_back(text.at(id));
        if (tpl.id == T::VehiclePosition) {
          return format_template(ts.str("answer"), {{"lane", capitalize_first(parts.front())}});
        }
        return render_lane_set(parts, ts);
      };
      const auto& answer = sel.answer_nodes;
      auto alt = [&](std::vector<NodeId> set, int tier) {
        tiers[tier].push_back(Decoy{render(std::move(set)), DecoySource::AlternateDescriptor, {}});
      };
      for (std::size_t i = 0; i < answer.size(); ++i) {
        for (const auto& o : others) {
          auto set = answer;
          set[i] = o;
          alt(set, 0);
        }
        if (answer.size() > 1) {
          auto set = answer;
          set.erase(set.begin() + static_cast<long>(i));
          alt(set, 0);
        }
      }
      if (tpl.id != T::VehiclePosition) {
        for (const auto& o : others) {
          auto set = answer;
          set.push_back(o);
          alt(set, 1);
        }
        for (std::size_t i = 0; i < others.size(); ++i) {
          for (std::size_t j = i + 1; j < others.size(); ++j) alt({others[i], others[j]}, 2);
        }
      }
      break;
    }
  }
  return tiers;
}

}  // namespace

std::optional<std::vector<Decoy>> perturb(const QueryTemplate& tpl, const PlanContext& ctx,
                                          const TargetSelection& selection, const SamplePlan& answer, Rng& rng,
                                          std::size_t k) {
  return take(decoy_tiers(tpl, ctx, selection, answer, rng), answer.answer_text, ctx.catalog.nota_text, rng, k);
}

int compute_reasoning_depth(const SamplePlan& plan) {
  std::set<std::pair<NodeId, std::string>> seen;
  int depth = 0;
  auto add = [&](const std::vector<NamedDescriptor>& ds) {
    for (const auto& nd : ds) {
      if (seen.insert({nd.descriptor.target, nd.descriptor.text}).second) depth += nd.descriptor.hops;
    }
  };
  add(plan.question_descriptors);
  add(plan.answer_descriptors);
  return depth + plan.traversals;
}

PlanOutcome plan(const QueryTemplate& tpl, const PlanContext& ctx, const TargetSelection& sel,
                 std::size_t selection_index, Rng& rng) {
  const auto& catalog = ctx.catalog;
  const auto& fg = ctx.fg;
  const auto& cfg = ctx.config;
  const auto& ts = catalog.tpl(tname(tpl.id));
  if (cfg.option_count < 2) throw RangeError("option count must be at least 2");

  SamplePlan p;
  p.template_id = tpl.id;
  p.scene_id = fg.scene_id;
  p.frame = fg.frame;
  for (Frame f = std::max(ctx.graph.frame_range.first, fg.frame - cfg.window + 1); f <= fg.frame; ++f) {
    p.window.push_back(f);
  }
  p.selection = sel;
  p.selection_index = selection_index;
  p.target_nodes = sel.nodes;
  p.target_nodes.insert(p.target_nodes.end(), sel.answer_nodes.begin(), sel.answer_nodes.end());
  p.traversals = tpl.traversals;
  for (const auto& [k, v] : sel.bindings) p.facts[k] = v;

  // Question-side descriptors, in mention order.
  static const char* kRoles[] = {"d1", "d2"};
  for (std::size_t i = 0; i < sel.nodes.size(); ++i) {
    auto d = describe(tpl, ctx, sel, sel.nodes[i], rng);
    if (!d) return {std::nullopt, "no unique descriptor for " + sel.nodes[i]};
    p.question_descriptors.push_back({sel.nodes.size() == 1 ? "d" : kRoles[i], std::move(*d)});
  }
  std::map<std::string, std::string> qvars;
  for (const auto& nd : p.question_descriptors) qvars[nd.role] = nd.descriptor.text;

  switch (tpl.id) {
    case T::LaneDirection:
    case T::LaneType:
    case T::TrafficLightStatus:
    case T::CrossingType:
      p.question = format_template(ts.str("question"), qvars);
      p.answer_text = format_template(ts.str("answer"), {{"value", p.facts["value"]}});
      break;
    case T::LineColor:
    case T::LineMarking:
    case T::LineType:
      qvars["side"] = p.facts["side"];
      p.question = format_template(ts.str("question"), qvars);
      p.answer_text = format_template(ts.str("answer"), {{"value", p.facts["value"]}});
      break;
    case T::TrafficLightChange:
      qvars["window"] = std::to_string(cfg.window);
      p.question = format_template(ts.str("question"), qvars);
      p.facts["changed"] = p.facts["first"] != p.facts["last"] ? "true" : "false";
      p.answer_text = format_template(ts.str(p.facts["changed"] == "true" ? "answer_changed" : "answer_constant"),
                                      {{"first", p.facts["first"]}, {"last", p.facts["last"]}});
      break;
    case T::CountingGeneric: {
      const auto& dkey = catalog.tpl("lane_direction").property_key;
      int same = 0, opposite = 0;
      bool split = !sel.answer_nodes.empty();
      for (const auto& id : sel.answer_nodes) {
        auto v = prop(fg.at(id), dkey);
        if (v == catalog.direction_values.at("same")) {
          ++same;
        } else if (v == catalog.direction_values.at("opposite")) {
          ++opposite;
        } else {
          split = false;
        }
      }
      if (split) {
        p.answer_counts = {opposite, same};
      } else {
        p.answer_counts = {static_cast<int>(sel.answer_nodes.size())};
      }
      p.facts["split"] = split ? "true" : "false";
      p.question = ts.str("question");
      p.answer_text = render_counts(tpl.id, p.answer_counts, ts, p.facts);
      break;
    }
    case T::CountingPerDirection: {
      const auto& value = p.facts["direction"];
      auto it = catalog.direction_phrases.find(value);
      p.facts["direction_phrase"] = it == catalog.direction_phrases.end() ? value : it->second;
      p.answer_counts = {static_cast<int>(sel.answer_nodes.size())};
      p.question = format_template(ts.str("question"), {{"direction", p.facts["direction_phrase"]}});
      p.answer_text = render_counts(tpl.id, p.answer_counts, ts, p.facts);
      break;
    }
    case T::CountingAtIntersectionPerDirection:
      p.answer_counts = {std::stoi(p.facts["approach"]), std::stoi(p.facts["exit"])};
      p.question = format_template(ts.str("question"), qvars);
      p.answer_text = render_counts(tpl.id, p.answer_counts, ts, p.facts);
      break;
    case T::CountingCrossing:
      p.answer_counts = {static_cast<int>(sel.answer_nodes.size())};
      p.question = ts.str("question");
      p.answer_text = render_counts(tpl.id, p.answer_counts, ts, p.facts);
      break;
    case T::PairwiseLaneComparisonByDirection:
      p.question = format_template(ts.str("question"), qvars);
      p.answer_text = render_direction_pair(p.facts["value1"], p.facts["value2"], catalog, ts);
      break;
    case T::PairwiseVehicleLocation:
      p.question = format_template(ts.str("question"), qvars);
      p.answer_text = render_vehicle_relation(p.facts["relation"], qvars["d1"], qvars["d2"], ts);
      break;
    case T::Pointing: {
      auto grounding = render_grounding(sel.nodes.front(), fg);
      if (grounding.empty()) return {std::nullopt, "target is not grounded"};
      p.facts["grounding"] = grounding;
      p.question = format_template(ts.str("question"), qvars);
      p.answer_text = format_template(ts.str("answer"), {{"grounding", grounding}});
      break;
    }
    case T::ExistenceOfCrossings: {
      const auto& side = p.facts["side"];
      qvars["side"] = catalog.side_phrases.at(side);
      p.question = format_template(ts.str("question"), qvars);
      const auto& outcome = p.facts["outcome"];
      p.answer_text =
          render_existence(outcome, outcome == "no_other" ? p.facts["other_side"] : p.facts["style"], catalog, ts);
      break;
    }
    case T::SignControlsLane:
    case T::TrafficLightControlsLane:
    case T::VehiclePosition: {
      std::vector<std::string> parts;
      for (const auto& lane : sel.answer_nodes) {
        auto d = describe(tpl, ctx, sel, lane, rng);
        if (!d) return {std::nullopt, "no unique descriptor for " + lane};
        parts.push_back(d->text);
        p.answer_descriptors.push_back({"answer", std::move(*d)});
      }
      p.question = format_template(ts.str("question"), qvars);
      if (tpl.id == T::VehiclePosition) {
        p.answer_text = format_template(ts.str("answer"), {{"lane", capitalize_first(parts.front())}});
      } else {
        p.answer_text = render_lane_set(parts, ts);
      }
      break;
    }
  }

  // Options: the correct one (answer or none-of-the-above) plus k decoys.
  std::size_t k = static_cast<std::size_t>(cfg.option_count - 1);
  p.correct_is_nota = rng.bernoulli(cfg.nota_correct_probability);
  bool nota_decoy = !p.correct_is_nota && rng.bernoulli(cfg.nota_decoy_probability);
  Tiers tiers = decoy_tiers(tpl, ctx, sel, p, rng);
  std::size_t want = nota_decoy ? k - 1 : k;
  auto decoys = take(tiers, p.answer_text, catalog.nota_text, rng, want);
  if (!decoys && !p.correct_is_nota && !nota_decoy) {
    // Fall back to none-of-the-above as filler when the pool runs dry.
    decoys = take(tiers, p.answer_text, catalog.nota_text, rng, k - 1);
    nota_decoy = decoys.has_value();
  }
  if (!decoys) return {std::nullopt, "fewer than " + std::to_string(k) + " distinct decoys"};
  p.decoys = std::move(*decoys);
  if (nota_decoy) p.decoys.push_back(Decoy{catalog.nota_text, DecoySource::NoneOfTheAbove, {}});
  p.correct_option = p.correct_is_nota ? catalog.nota_text : p.answer_text;

  p.reasoning_depth = compute_reasoning_depth(p);
  return {std::move(p), {}};
}

nlohmann::ordered_json plan_to_json(const SamplePlan& p) {
  nlohmann::ordered_json out;
  out["template_id"] = tname(p.template_id);
  out["scene_id"] = p.scene_id;
  out["frame"] = p.frame;
  out["selection"] = p.selection.key();
  out["target_nodes"] = p.target_nodes;
  out["question"] = p.question;
  out["answer"] = p.answer_text;
  out["correct_option"] = p.correct_option;
  out["correct_is_none_of_the_above"] = p.correct_is_nota;
  nlohmann::ordered_json decoys = nlohmann::ordered_json::array();
  for (const auto& d : p.decoys) {
    nlohmann::ordered_json dj{{"text", d.text}, {"source", std::string(decoy_source_name(d.source))}};
    if (!d.counts.empty()) dj["counts"] = d.counts;
    decoys.push_back(dj);
  }
  out["decoys"] = decoys;
  nlohmann::ordered_json descs = nlohmann::ordered_json::array();
  for (const auto* group : {&p.question_descriptors, &p.answer_descriptors}) {
    for (const auto& nd : *group) {
      auto dj = descriptor_to_json(nd.descriptor);
      nlohmann::ordered_json wrapped;
      wrapped["role"] = nd.role;
      for (auto& [k, v] : dj.items()) wrapped[k] = v;
      descs.push_back(wrapped);
    }
  }
  out["descriptors"] = descs;
  out["facts"] = p.facts;
  if (!p.answer_counts.empty()) out["answer_counts"] = p.answer_counts;
  out["reasoning_depth"] = p.reasoning_depth;
  out["template_traversals"] = p.traversals;
  out["rng_seed"] = p.rng_seed;
  return out;
}

}  // namespace crs
