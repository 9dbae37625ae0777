#include "crs/cot.hpp"

#include <algorithm>

#include "crs/error.hpp"
#include "crs/graph_io.hpp"
#include "crs/text.hpp"

namespace crs {

std::string render_grounding(const NodeId& node, const FrameGraph& fg) {
  const auto* n = fg.find(node);
  if (!n || n->markers.empty()) return {};
  std::vector<std::string> cameras;
  for (Camera c : {Camera::Left, Camera::Center, Camera::Right}) {
    bool seen = std::any_of(n->markers.begin(), n->markers.end(), [&](const CameraMarker& m) { return m.camera == c; });
    if (seen) cameras.emplace_back(camera_name(c));
  }
  return join_and(cameras) + " view at " + render_marker(n->markers.front());
}

std::string CoTTrace::text() const {
  std::string out;
  for (const auto& s : steps) out += s.label + " " + s.text + "\n";
  out += "Conclusion: " + conclusion;
  return out;
}

FactBudget FactBudget::from_catalog(const Catalog& catalog) {
  FactBudget b;
  if (catalog.fact_budget.size() == 3) {
    b.properties = catalog.fact_budget[0];
    b.relations = catalog.fact_budget[1];
    b.neighbor_properties = catalog.fact_budget[2];
  }
  return b;
}

nlohmann::ordered_json cot_to_json(const CoTTrace& trace) {
  nlohmann::ordered_json out;
  out["text"] = trace.text();
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& s : trace.steps) {
    steps.push_back(nlohmann::ordered_json{{"label", s.label}, {"kind", s.kind}, {"text", s.text}, {"nodes", s.nodes}});
  }
  out["steps"] = steps;
  out["conclusion"] = trace.conclusion;
  nlohmann::ordered_json markers = nlohmann::ordered_json::array();
  for (const auto& g : trace.grounded_markers) {
    markers.push_back(
        nlohmann::ordered_json{{"step", g.step}, {"node", g.node}, {"marker", marker_to_json(g.marker)}});
  }
  out["grounded_markers"] = markers;
  return out;
}

namespace {

class Builder {
 public:
  Builder(const SamplePlan& plan, const FrameGraph& fg, const Catalog& catalog, Rng& rng, const FactBudget& budget)
      : plan_(plan), fg_(fg), cat_(catalog), rng_(rng), budget_(budget), types_(node_type_map(fg)),
        ts_(catalog.tpl(std::string(template_info(plan.template_id).name))) {}

  CoTTrace build();

 private:
  std::string type_of(const NodeId& id) const {
    auto it = types_.find(id);
    return it == types_.end() ? id : it->second;
  }

  /// Adds a step; `grounded` nodes get their first marker recorded.
  void step(std::string kind, std::string text, std::vector<NodeId> nodes, const std::vector<NodeId>& grounded = {}) {
    std::size_t index = trace_.steps.size();
    for (const auto& id : grounded) {
      const auto* n = fg_.find(id);
      if (n && !n->markers.empty()) trace_.grounded_markers.push_back({index, id, n->markers.front()});
    }
    trace_.steps.push_back(
        CoTStep{"Step " + std::to_string(index + 1) + ":", std::move(kind), std::move(text), std::move(nodes)});
  }

  std::string located(const NodeId& id) const {
    auto g = render_grounding(id, fg_);
    return g.empty() ? std::string{} : ", located in the " + g;
  }

  void walk_descriptor(const Descriptor& d);
  std::string facts_for(const NodeId& node, const std::set<std::string>& skip_keys,
                        const std::set<NodeId>& skip_neighbors, const std::set<std::string>& skip_labels,
                        std::vector<NodeId>& named);
  void fact_step(const NamedDescriptor& nd, const std::set<std::string>& skip_keys,
                 const std::set<std::string>& skip_labels = {});
  std::set<NodeId> chain_nodes(const Descriptor& d) const;

  void counting();
  void conclude();

  const SamplePlan& plan_;
  const FrameGraph& fg_;
  const Catalog& cat_;
  Rng& rng_;
  FactBudget budget_;
  std::map<NodeId, std::string> types_;
  const TemplateStrings& ts_;
  CoTTrace trace_;
};

/// Link 1 grounds the innermost anchor; Link 2 walks each hop back to the target.
void Builder::walk_descriptor(const Descriptor& d) {
  const auto& term = d.terminal;
  std::string type = type_of(term.node);
  auto grounding = render_grounding(term.node, fg_);
  if (term.kind == AnchorKind::PointMarker && term.marker) {
    step("anchor",
         format_template(cat_.cot_str("anchor_point"),
                         {{"marker", render_marker(*term.marker)}, {"type", type}, {"grounding", grounding}}),
         {term.node}, {term.node});
  } else {
    Descriptor bare;
    bare.terminal = term;
    auto text = render_descriptor(bare, types_, cat_.render);
    if (grounding.empty()) {
      step("anchor", format_template(cat_.cot_str("anchor_ungrounded"), {{"descriptor", text}}), {term.node});
    } else {
      step("anchor", format_template(cat_.cot_str("anchor"), {{"descriptor", text}, {"grounding", grounding}}),
           {term.node}, {term.node});
    }
  }

  auto deps = d.deps;
  std::sort(deps.begin(), deps.end(),
            [](const Dependency& a, const Dependency& b) { return a.hop_depth < b.hop_depth; });
  for (const auto& dep : deps) {
    bool final_hop = dep.downstream == d.target;
    auto g = render_grounding(dep.downstream, fg_);
    std::string key = final_hop ? "traverse_final" : "traverse_step";
    if (g.empty()) key += "_ungrounded";
    step("traverse",
         format_template(cat_.cot_str(key), {{"type", type_of(dep.downstream)},
                                             {"relation", dep.relation},
                                             {"anchor_type", type_of(dep.intermediate)},
                                             {"grounding", g}}),
         {dep.downstream}, {dep.downstream});
  }
}

std::set<NodeId> Builder::chain_nodes(const Descriptor& d) const {
  std::set<NodeId> out{d.terminal.node};
  for (const auto& dep : d.deps) {
    out.insert(dep.intermediate);
    out.insert(dep.downstream);
  }
  return out;
}

template <typename Key>
void rank(std::vector<Key>& items, const std::vector<std::string>* priority, Rng& rng,
          const std::function<std::string(const Key&)>& name) {
  rng.shuffle(items);
  if (!priority) return;
  auto pos = [&](const Key& k) {
    auto it = std::find(priority->begin(), priority->end(), name(k));
    return it == priority->end() ? priority->size() : static_cast<std::size_t>(it - priority->begin());
  };
  std::stable_sort(items.begin(), items.end(), [&](const Key& a, const Key& b) { return pos(a) < pos(b); });
}

/// Link 3: up to i properties, then up to j relations, each neighbour
/// summarised by up to l of its own properties.
std::string Builder::facts_for(const NodeId& node, const std::set<std::string>& skip_keys,
                               const std::set<NodeId>& skip_neighbors, const std::set<std::string>& skip_labels,
                               std::vector<NodeId>& named) {
  const auto& n = fg_.at(node);
  auto priority = [](const std::map<std::string, std::vector<std::string>>& table, const std::string& type) {
    auto it = table.find(type);
    return it == table.end() ? nullptr : &it->second;
  };
  std::vector<std::string> sentences;

  std::vector<std::string> keys;
  for (const auto& [k, v] : n.properties) {
    if (!skip_keys.count(k)) keys.push_back(k);
  }
  rank<std::string>(keys, priority(cat_.property_priority, n.type), rng_, [](const std::string& k) { return k; });
  for (std::size_t i = 0; i < keys.size() && static_cast<int>(i) < budget_.properties; ++i) {
    sentences.push_back(format_template(cat_.cot_str("fact_property"),
                                        {{"type", n.type}, {"key", keys[i]}, {"value", n.properties.at(keys[i])}}));
  }

  std::vector<const FrameEdge*> rels;
  for (const auto* e : fg_.outgoing(node)) {
    if (!skip_neighbors.count(e->target) && !skip_labels.count(e->label)) rels.push_back(e);
  }
  rank<const FrameEdge*>(rels, priority(cat_.relation_priority, n.type), rng_,
                         [](const FrameEdge* const& e) { return e->label; });
  for (std::size_t i = 0; i < rels.size() && static_cast<int>(i) < budget_.relations; ++i) {
    const auto& other = fg_.at(rels[i]->target);
    std::vector<std::string> okeys;
    for (const auto& [k, v] : other.properties) okeys.push_back(k);
    rank<std::string>(okeys, priority(cat_.property_priority, other.type), rng_,
                      [](const std::string& k) { return k; });
    std::vector<std::string> parts;
    for (std::size_t j = 0; j < okeys.size() && static_cast<int>(j) < budget_.neighbor_properties; ++j) {
      parts.push_back(okeys[j] + " " + other.properties.at(okeys[j]));
    }
    std::map<std::string, std::string> vars{
        {"article", indefinite_article(other.type)}, {"type", other.type}, {"facts", join_and(parts)}};
    auto neighbor = format_template(cat_.cot_str(parts.empty() ? "neighbor" : "neighbor_with"), vars);
    auto g = render_grounding(other.id, fg_);
    sentences.push_back(format_template(cat_.cot_str(g.empty() ? "fact_relation" : "fact_relation_grounded"),
                                        {{"type", n.type},
                                         {"relation", rels[i]->label},
                                         {"neighbor", neighbor},
                                         {"grounding", g}}));
    named.push_back(other.id);
  }

  std::string out;
  for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
  return out;
}

void Builder::fact_step(const NamedDescriptor& nd, const std::set<std::string>& skip_keys,
                        const std::set<std::string>& skip_labels) {
  const auto& d = nd.descriptor;
  std::set<std::string> keys = skip_keys;
  // The anchor the descriptor already used is not news.
  if (d.terminal.node == d.target && d.terminal.kind == AnchorKind::Property) keys.insert(d.terminal.key);
  std::vector<NodeId> named{d.target};
  auto text = facts_for(d.target, keys, chain_nodes(d), skip_labels, named);
  if (!text.empty()) step("fact", text, named, std::vector<NodeId>(named.begin() + 1, named.end()));
}

void Builder::counting() {
  const auto id = plan_.template_id;
  std::string d = plan_.question_descriptors.empty() ? std::string{} : plan_.question_descriptors[0].descriptor.text;
  auto facts = plan_.facts;
  step("scope", format_template(ts_.str("scope"), {{"d", d}, {"direction", facts["direction_phrase"]}}), {});

  const auto& dkey = cat_.tpl("lane_direction").property_key;
  std::string noun = capitalize_first(ts_.str("noun_one"));
  std::size_t approach = id == TemplateId::CountingAtIntersectionPerDirection ? std::stoul(facts["approach"]) : 0;
  const auto& items = plan_.selection.answer_nodes;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& n = fg_.at(items[k]);
    std::string name = noun + " " + std::to_string(k + 1);
    auto value = n.properties.count(dkey) ? n.properties.at(dkey) : cat_.cot_str("unknown_value");
    std::string relation = k < approach ? cat_.label("leads_up_to") : cat_.label("leaves");
    auto text = format_template(ts_.str("enumerate"), {{"name", name},
                                                       {"value", value},
                                                       {"direction", facts["direction_phrase"]},
                                                       {"relation", relation},
                                                       {"located", located(n.id)}});
    std::vector<NodeId> nodes{n.id};
    if (k > 0) {
      const auto& prev = items[k - 1];
      for (const auto* e : fg_.outgoing(n.id)) {
        if (e->target != prev) continue;
        text += " " + format_template(cat_.cot_str("enumerate_link"),
                                      {{"name", name},
                                       {"relation", e->label},
                                       {"previous", noun + " " + std::to_string(k)}});
        nodes.push_back(prev);
        break;
      }
    }
    step("enumerate", text, nodes, {n.id});
  }

  auto phrase = [&](int n) { return std::to_string(n) + " " + (n == 1 ? ts_.str("noun_one") : ts_.str("noun_many")); };
  const auto& c = plan_.answer_counts;
  std::string text;
  if (id == TemplateId::CountingGeneric) {
    if (c.size() == 2) {
      text = format_template(ts_.str("aggregate_split"),
                             {{"total", phrase(c[0] + c[1])}, {"same_n", std::to_string(c[1])},
                              {"opposite_n", std::to_string(c[0])}});
    } else {
      text = format_template(ts_.str("aggregate_total"), {{"total", phrase(c[0])}});
    }
  } else if (id == TemplateId::CountingAtIntersectionPerDirection) {
    text = format_template(ts_.str("aggregate"), {{"approach", phrase(c[0])}, {"exit", phrase(c[1])}});
  } else {
    text = format_template(ts_.str("aggregate"), {{"count", phrase(c[0])}, {"direction", facts["direction_phrase"]}});
  }
  step("aggregate", text, items);
}

void Builder::conclude() {
  auto key = plan_.correct_is_nota ? "conclusion_nota" : "conclusion";
  trace_.conclusion = format_template(cat_.cot_str(key), {{"option", plan_.correct_option}});
}

CoTTrace Builder::build() {
  auto facts = plan_.facts;
  const auto& q = plan_.question_descriptors;
  for (const auto& nd : q) walk_descriptor(nd.descriptor);

  switch (plan_.template_id) {
    case TemplateId::LaneDirection:
    case TemplateId::LaneType:
    case TemplateId::TrafficLightStatus:
    case TemplateId::CrossingType: {
      const auto& target = q.at(0).descriptor.target;
      fact_step(q.at(0), {facts["key"]});
      step("extract",
           format_template(ts_.str("extract"), {{"type", type_of(target)}, {"key", facts["key"]}, {"value", facts["value"]}}),
           {target});
      break;
    }
    case TemplateId::LineColor:
    case TemplateId::LineMarking:
    case TemplateId::LineType: {
      const auto& line = plan_.selection.answer_nodes.at(0);
      fact_step(q.at(0), {}, {});
      step("extract",
           format_template(ts_.str("extract"), {{"side", facts["side"]},
                                                {"located", located(line)},
                                                {"key", facts["key"]},
                                                {"value", facts["value"]}}),
           {line}, {line});
      break;
    }
    case TemplateId::TrafficLightChange: {
      const auto& target = q.at(0).descriptor.target;
      fact_step(q.at(0), {facts["key"]});
      step("extract",
           format_template(ts_.str("extract_series"), {{"key", facts["key"]},
                                                       {"window", std::to_string(plan_.window.size())},
                                                       {"series", facts["series"]}}),
           {target});
      break;
    }
    case TemplateId::CountingGeneric:
    case TemplateId::CountingPerDirection:
    case TemplateId::CountingAtIntersectionPerDirection:
    case TemplateId::CountingCrossing:
      counting();
      break;
    case TemplateId::PairwiseLaneComparisonByDirection:
      step("compare", format_template(ts_.str("compare"), {{"value1", facts["value1"]}, {"value2", facts["value2"]}}),
           {q.at(0).descriptor.target, q.at(1).descriptor.target});
      break;
    case TemplateId::PairwiseVehicleLocation: {
      const auto& lanes = plan_.selection.answer_nodes;
      for (std::size_t i = 0; i < 2; ++i) {
        const auto& lane = lanes.at(std::min(i, lanes.size() - 1));
        std::vector<NodeId> named{lane};
        std::set<NodeId> skip{q[0].descriptor.target, q[1].descriptor.target};
        auto lane_facts = facts_for(lane, {}, skip, {}, named);
        auto text = format_template(ts_.str("lane_of"), {{"actor", q[i].descriptor.text},
                                                         {"located", located(lane)},
                                                         {"facts", lane_facts}});
        while (!text.empty() && text.back() == ' ') text.pop_back();
        step("traverse", text, named, {lane});
      }
      const auto& rel = facts["relation"];
      std::string text;
      if (rel == "same") {
        text = ts_.str("infer_same");
      } else if (rel == "apart") {
        text = ts_.str("infer_apart");
      } else {
        text = format_template(ts_.str("infer_relative"), {{"relation", rel + " of"}});
      }
      step("compare", text, lanes);
      break;
    }
    case TemplateId::Pointing: {
      const auto& target = q.at(0).descriptor.target;
      step("extract", format_template(ts_.str("locate"), {{"grounding", facts["grounding"]}}), {target}, {target});
      break;
    }
    case TemplateId::ExistenceOfCrossings: {
      const auto& side = facts["side"];
      const auto& phrase = cat_.side_phrases.at(side);
      step("scope", format_template(ts_.str("task"), {{"side", phrase}, {"d", q.at(0).descriptor.text}}), {});
      const auto& outcome = facts["outcome"];
      const auto& found = plan_.selection.answer_nodes;
      if (outcome == "yes_style" || outcome == "yes_unmarked") {
        step("extract", format_template(ts_.str("found"), {{"side", phrase}, {"located", located(found.at(0))}}),
             {found.at(0)}, {found.at(0)});
        step("extract", format_template(ts_.str("style"), {{"style", facts["style"]}}), {found.at(0)});
      } else {
        step("extract", format_template(ts_.str("not_found"), {{"side", phrase}}), {});
        if (outcome == "no_other") {
          const auto& other_phrase = cat_.side_phrases.at(facts["other_side"]);
          step("extract",
               format_template(ts_.str("found"), {{"side", other_phrase}, {"located", located(found.at(0))}}),
               {found.at(0)}, {found.at(0)});
        }
      }
      break;
    }
    case TemplateId::SignControlsLane:
    case TemplateId::TrafficLightControlsLane: {
      fact_step(q.at(0), {}, {cat_.label("controls")});
      std::vector<std::string> texts;
      std::vector<NodeId> lanes;
      for (const auto& nd : plan_.answer_descriptors) {
        texts.push_back(nd.descriptor.text);
        lanes.push_back(nd.descriptor.target);
      }
      auto n = static_cast<int>(lanes.size());
      step("traverse",
           format_template(ts_.str("controlled"),
                           {{"type", type_of(q.at(0).descriptor.target)},
                            {"count", std::to_string(n) + (n == 1 ? " lane" : " lanes")},
                            {"lanes", join_and(texts)}}),
           lanes, lanes);
      step("compare", ts_.str("match"), lanes);
      break;
    }
    case TemplateId::VehiclePosition: {
      fact_step(q.at(0), {}, {cat_.label("is_in")});
      const auto& lane = plan_.answer_descriptors.at(0).descriptor.target;
      step("traverse", format_template(ts_.str("contained"), {{"located", located(lane)}}), {lane}, {lane});
      step("compare", ts_.str("match"), {lane});
      break;
    }
  }
  conclude();
  return std::move(trace_);
}

}  // namespace

CoTTrace build_cot(const SamplePlan& plan, const FrameGraph& fg, const Catalog& catalog, Rng& rng,
                   const FactBudget& budget) {
  return Builder(plan, fg, catalog, rng, budget).build();
}

}  // namespace crs
