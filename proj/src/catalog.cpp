#include "crs/catalog.hpp"

#include <algorithm>

#include "crs/error.hpp"
#include "crs/graph_io.hpp"

namespace crs {

namespace {

struct Required {
  const char* id;
  bool needs_key;
  bool needs_vocabulary;
  std::vector<const char*> strings;
};

const std::vector<Required>& required_templates() {
  static const std::vector<Required> table = {
      {"lane_direction", true, true, {"question", "answer", "extract"}},
      {"lane_type", true, true, {"question", "answer", "extract"}},
      {"line_color", true, true, {"question", "answer", "extract"}},
      {"line_marking", true, true, {"question", "answer", "extract"}},
      {"line_type", true, true, {"question", "answer", "extract"}},
      {"traffic_light_status", true, true, {"question", "answer", "extract"}},
      {"crossing_type", true, true, {"question", "answer", "extract"}},
      {"traffic_light_change", true, true,
       {"question", "answer_changed", "answer_constant", "extract_series", "unknown_value"}},
      {"counting_generic", false, false,
       {"question", "answer_split", "answer_total", "noun_one", "noun_many", "scope", "enumerate",
        "aggregate_split", "aggregate_total"}},
      {"counting_per_direction", false, false,
       {"question", "answer", "noun_one", "noun_many", "scope", "enumerate", "aggregate"}},
      {"counting_at_intersection_per_direction", false, false,
       {"question", "answer", "noun_one", "noun_many", "scope", "enumerate", "aggregate"}},
      {"counting_crossing", false, false, {"question", "answer", "noun_one", "noun_many", "scope", "enumerate", "aggregate"}},
      {"pairwise_lane_comparison_by_direction", false, false,
       {"question", "answer_same", "answer_different", "compare"}},
      {"pairwise_vehicle_location", false, false,
       {"question", "answer_same", "answer_left", "answer_right", "answer_apart", "lane_of", "infer_same",
        "infer_relative", "infer_apart"}},
      {"pointing", false, false, {"question", "answer", "locate"}},
      {"existence_of_crossings", false, false,
       {"question", "answer_yes_style", "answer_yes_unmarked", "answer_no_other", "answer_no", "unmarked_value",
        "task", "found", "not_found", "style"}},
      {"sign_controls_lane", false, false, {"question", "answer", "controlled", "match"}},
      {"traffic_light_controls_lane", false, false, {"question", "answer", "controlled", "match"}},
      {"vehicle_position", false, false, {"question", "answer", "contained", "match"}},
  };
  return table;
}

const std::vector<const char*> kTypeRoles = {"ego", "lane", "lane_line", "traffic_light", "sign", "crossing",
                                             "intersection"};
const std::vector<const char*> kLabelRoles = {"is_in",        "contains",     "controls",    "is_controlled_by",
                                              "left_of",      "right_of",     "left_marking", "right_marking",
                                              "leads_up_to",  "leaves",       "is_on"};
const std::vector<const char*> kCotStrings = {
    "anchor",         "anchor_ungrounded", "anchor_point",     "traverse_final", "traverse_final_ungrounded",
    "traverse_step",  "traverse_step_ungrounded", "fact_property", "fact_relation", "fact_relation_grounded",
    "conclusion",     "conclusion_nota",   "enumerate_link",   "neighbor",       "neighbor_with",
    "unknown_value"};

class Collector {
 public:
  void add(std::string problem) { problems_.push_back(std::move(problem)); }

  template <typename T>
  bool get(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      add(where + ": missing '" + key + "'");
      return false;
    }
    try {
      out = obj.at(key).get<T>();
      return true;
    } catch (const nlohmann::json::exception&) {
      add(where + ": '" + key + "' has the wrong type");
      return false;
    }
  }

  void raise() const {
    if (problems_.empty()) return;
    std::string msg = "invalid template catalog:";
    for (const auto& p : problems_) msg += "\n  " + p;
    throw SchemaError(msg);
  }

 private:
  std::vector<std::string> problems_;
};

}  // namespace

const std::string& TemplateStrings::str(const std::string& key) const {
  auto it = strings.find(key);
  if (it == strings.end()) throw SchemaError("template '" + id + "' has no string '" + key + "'");
  return it->second;
}

const std::string& Catalog::type(const std::string& role) const {
  auto it = types.find(role);
  if (it == types.end()) throw SchemaError("catalog has no type role '" + role + "'");
  return it->second;
}

const std::string& Catalog::label(const std::string& role) const {
  auto it = labels.find(role);
  if (it == labels.end()) throw SchemaError("catalog has no label role '" + role + "'");
  return it->second;
}

const std::string& Catalog::cot_str(const std::string& key) const {
  auto it = cot.find(key);
  if (it == cot.end()) throw SchemaError("catalog has no reasoning string '" + key + "'");
  return it->second;
}

const TemplateStrings& Catalog::tpl(const std::string& id) const {
  auto it = templates.find(id);
  if (it == templates.end()) throw SchemaError("catalog has no template '" + id + "'");
  return it->second;
}

bool Catalog::is_actor(const std::string& node_type) const {
  return std::find(actor_types.begin(), actor_types.end(), node_type) != actor_types.end();
}

Catalog catalog_from_json(const nlohmann::json& doc) {
  Collector c;
  Catalog cat;
  if (!doc.is_object()) throw SchemaError("invalid template catalog: document is not an object");

  if (c.get(doc, "catalog_version", cat.version, "catalog") && cat.version != kCatalogVersion) {
    c.add("catalog: unsupported catalog_version " + std::to_string(cat.version));
  }
  if (c.get(doc, "option_count", cat.option_count, "catalog") && cat.option_count < 2) {
    c.add("catalog: option_count must be at least 2");
  }

  if (doc.contains("none_of_the_above")) {
    const auto& nota = doc["none_of_the_above"];
    c.get(nota, "text", cat.nota_text, "none_of_the_above");
    c.get(nota, "decoy_probability", cat.nota_decoy_probability, "none_of_the_above");
    c.get(nota, "correct_probability", cat.nota_correct_probability, "none_of_the_above");
    for (double p : {cat.nota_decoy_probability, cat.nota_correct_probability}) {
      if (p < 0.0 || p > 1.0) c.add("none_of_the_above: probabilities must lie in [0,1]");
    }
    if (cat.nota_text.empty()) c.add("none_of_the_above: empty text");
  } else {
    c.add("catalog: missing 'none_of_the_above'");
  }

  if (doc.contains("rendering")) {
    c.get(doc["rendering"], "property_phrase", cat.render.property_phrase, "rendering");
    c.get(doc["rendering"], "description_key", cat.render.description_key, "rendering");
  } else {
    c.add("catalog: missing 'rendering'");
  }

  if (c.get(doc, "types", cat.types, "catalog")) {
    for (const char* role : kTypeRoles) {
      if (!cat.types.count(role)) c.add(std::string("types: missing role '") + role + "'");
    }
  }
  c.get(doc, "actor_types", cat.actor_types, "catalog");
  if (c.get(doc, "labels", cat.labels, "catalog")) {
    for (const char* role : kLabelRoles) {
      if (!cat.labels.count(role)) c.add(std::string("labels: missing role '") + role + "'");
    }
  }
  if (c.get(doc, "direction_values", cat.direction_values, "catalog")) {
    for (const char* role : {"same", "opposite"}) {
      if (!cat.direction_values.count(role)) c.add(std::string("direction_values: missing '") + role + "'");
    }
  }
  c.get(doc, "direction_phrases", cat.direction_phrases, "catalog");
  for (const auto& [role, value] : cat.direction_values) {
    if (!cat.direction_phrases.count(value)) c.add("direction_phrases: no phrase for '" + value + "'");
  }
  c.get(doc, "side_phrases", cat.side_phrases, "catalog");

  if (doc.contains("cot") && doc["cot"].is_object()) {
    const auto& cot = doc["cot"];
    for (const auto& [key, value] : cot.items()) {
      if (value.is_string()) cat.cot[key] = value.get<std::string>();
    }
    for (const char* key : kCotStrings) {
      if (!cat.cot.count(key)) c.add(std::string("cot: missing string '") + key + "'");
    }
    if (c.get(cot, "fact_budget", cat.fact_budget, "cot")) {
      if (cat.fact_budget.size() != 3 ||
          std::any_of(cat.fact_budget.begin(), cat.fact_budget.end(), [](int v) { return v < 0; })) {
        c.add("cot: fact_budget must be three non-negative integers");
      }
    }
    c.get(cot, "property_priority", cat.property_priority, "cot");
    c.get(cot, "relation_priority", cat.relation_priority, "cot");
  } else {
    c.add("catalog: missing 'cot'");
  }

  if (doc.contains("templates") && doc["templates"].is_object()) {
    const auto& templates = doc["templates"];
    for (const auto& [id, body] : templates.items()) {
      const auto& table = required_templates();
      if (std::none_of(table.begin(), table.end(), [&](const Required& r) { return id == r.id; })) {
        c.add("templates: unknown template '" + id + "'");
      }
    }
    for (const auto& req : required_templates()) {
      std::string where = std::string("templates.") + req.id;
      if (!templates.contains(req.id) || !templates[req.id].is_object()) {
        c.add("templates: missing template '" + std::string(req.id) + "'");
        continue;
      }
      const auto& body = templates[req.id];
      TemplateStrings ts;
      ts.id = req.id;
      for (const auto& [key, value] : body.items()) {
        if (value.is_string() && key != "property_key") ts.strings[key] = value.get<std::string>();
      }
      if (req.needs_key) c.get(body, "property_key", ts.property_key, where);
      if (body.contains("vocabulary")) c.get(body, "vocabulary", ts.vocabulary, where);
      if (body.contains("extra_decoys")) c.get(body, "extra_decoys", ts.extra_decoys, where);
      if (req.needs_vocabulary && ts.vocabulary.empty()) c.add(where + ": empty vocabulary");
      for (const char* s : req.strings) {
        if (!ts.strings.count(s)) c.add(where + ": missing string '" + s + "'");
      }
      cat.templates[req.id] = std::move(ts);
    }
  } else {
    c.add("catalog: missing 'templates'");
  }

  c.raise();
  return cat;
}

Catalog load_catalog(const std::filesystem::path& path) {
  try {
    return catalog_from_json(parse_json_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

const Catalog& default_catalog() {
  static const Catalog cat = catalog_from_json(nlohmann::json::parse(default_catalog_text()));
  return cat;
}

}  // namespace crs
