#include "crs/canonical.hpp"

#include <algorithm>
#include <cctype>

namespace crs {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\n");
  return s.substr(b, e - b + 1);
}

std::string first_word(const std::string& s) {
  auto t = trim(s);
  auto end = t.find(' ');
  return end == std::string::npos ? t : t.substr(0, end);
}

bool contains(const std::vector<std::string>& list, const std::string& v) {
  return std::find(list.begin(), list.end(), v) != list.end();
}

bool starts_with_any(const std::string& s, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return s.rfind(p, 0) == 0; });
}

}  // namespace

std::string_view operator_name(CanonicalOperator op) {
  switch (op) {
    case CanonicalOperator::Node:
      return "phi_n";
    case CanonicalOperator::Property:
      return "phi_p";
    case CanonicalOperator::Edge:
      return "phi_e";
  }
  return "phi_n";
}

CanonicalRules CanonicalRules::defaults() {
  CanonicalRules r;
  r.relation_verbs = {"is",        "are",      "has",      "contains", "controls",  "leads",      "leaves",
                      "marks",     "approaches", "cuts",   "crosses",  "follows",   "precedes",   "belongs",
                      "connects",  "merges",   "splits",   "blocks",   "occludes",  "faces",      "enters",
                      "exits",     "overtakes", "yields",  "regulates", "borders",  "separates",  "intersects",
                      "covers",    "points",   "turns",    "stands",   "waits",     "drives",     "travels",
                      "runs",      "lies",     "goes",     "belong",   "touches",   "passes",     "overlaps",
                      "governs",   "indicates", "restricts", "serves", "feeds",     "joins",      "ends",
                      "starts",    "begins",   "continues", "bounds",  "surrounds", "neighbors",  "adjoins"};
  r.boolean_literals = {"true", "false", "yes", "no"};
  r.predicate_key_prefixes = {"is_", "has_", "is ", "has "};
  r.articles = {"a", "an", "the"};
  return r;
}

std::vector<std::string> check_node_type(const std::string& type, const CanonicalRules& rules) {
  std::vector<std::string> rules_hit;
  auto t = trim(type);
  if (t.empty()) {
    rules_hit.push_back("empty_type");
    return rules_hit;
  }
  auto lt = lower(t);
  if (contains(rules.articles, lower(first_word(t))) && t.find(' ') != std::string::npos)
    rules_hit.push_back("leading_article");
  if (contains(rules.boolean_literals, lt)) rules_hit.push_back("boolean_type");
  if (t.find('=') != std::string::npos || t.find(':') != std::string::npos ||
      starts_with_any(lt, rules.predicate_key_prefixes))
    rules_hit.push_back("key_value_encoding");
  return rules_hit;
}

std::vector<std::string> check_property(const std::string& key, const std::string& value,
                                        const CanonicalRules& rules) {
  std::vector<std::string> rules_hit;
  auto k = lower(trim(key));
  if (k.empty()) rules_hit.push_back("empty_key");
  if (starts_with_any(k, rules.predicate_key_prefixes)) rules_hit.push_back("predicate_key");
  auto v = lower(trim(value));
  if (v.empty()) rules_hit.push_back("empty_value");
  if (contains(rules.boolean_literals, v)) rules_hit.push_back("boolean_value");
  return rules_hit;
}

std::vector<std::string> check_edge_label(const std::string& label, const CanonicalRules& rules) {
  std::vector<std::string> rules_hit;
  auto l = lower(trim(label));
  if (l.empty()) {
    rules_hit.push_back("empty_label");
    return rules_hit;
  }
  auto verb = first_word(l);
  if (!contains(rules.relation_verbs, verb)) {
    rules_hit.push_back("non_verb_label");
  } else if (l == verb && (verb == "is" || verb == "are" || verb == "has")) {
    rules_hit.push_back("bare_copula");
  }
  return rules_hit;
}

ValidationReport validate_canonical(const SceneGraph& graph, const CanonicalRules& rules) {
  ValidationReport report;
  for (const auto& node : graph.nodes) {
    for (auto& rule : check_node_type(node.type, rules)) {
      report.push_back({CanonicalOperator::Node, node.id, rule, "There exists a " + node.type});
    }
    for (const auto& [key, value] : node.properties) {
      std::vector<std::string> seen;
      for (const auto& v : value.all_values()) {
        for (auto& rule : check_property(key, v, rules)) {
          if (contains(seen, rule)) continue;
          seen.push_back(rule);
          report.push_back({CanonicalOperator::Property, node.id, rule,
                            "The " + key + " of " + node.type + " is '" + v + "'"});
        }
      }
    }
  }
  for (const auto& edge : graph.edges) {
    const auto* src = graph.find_node(edge.source);
    const auto* dst = graph.find_node(edge.target);
    std::vector<std::string> seen;
    for (const auto& v : edge.label.all_values()) {
      for (auto& rule : check_edge_label(v, rules)) {
        if (contains(seen, rule)) continue;
        seen.push_back(rule);
        report.push_back({CanonicalOperator::Edge, edge.id, rule,
                          "The " + (src ? src->type : edge.source) + " " + v + " the " +
                              (dst ? dst->type : edge.target)});
      }
    }
  }
  return report;
}

nlohmann::ordered_json violation_to_json(const CanonicalViolation& v) {
  nlohmann::ordered_json j;
  j["operator"] = operator_name(v.op);
  j["element"] = v.element_id;
  j["rule"] = v.rule;
  j["detail"] = v.detail;
  return j;
}

nlohmann::ordered_json canonical_report_to_json(const ValidationReport& report) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : report) arr.push_back(violation_to_json(v));
  return arr;
}

}  // namespace crs
