#pragma once

// Lexical well-formedness checks for types, properties and edge labels.
// A type must complete "There exists a <type>", a property "The <key> of
// <type> is '<value>'", and an edge label "The <type> <label> the <type>".

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/graph.hpp"

namespace crs {

enum class CanonicalOperator { Node, Property, Edge };

std::string_view operator_name(CanonicalOperator op);  // "phi_n" / "phi_p" / "phi_e"

struct CanonicalViolation {
  CanonicalOperator op;
  std::string element_id;  // node id or edge id
  std::string rule;
  std::string detail;
  bool operator==(const CanonicalViolation&) const = default;
};

struct CanonicalRules {
  std::vector<std::string> relation_verbs;
  std::vector<std::string> boolean_literals;
  std::vector<std::string> predicate_key_prefixes;
  std::vector<std::string> articles;

  static CanonicalRules defaults();
};

using ValidationReport = std::vector<CanonicalViolation>;

std::vector<std::string> check_node_type(const std::string& type, const CanonicalRules& rules);
std::vector<std::string> check_property(const std::string& key, const std::string& value,
                                        const CanonicalRules& rules);
std::vector<std::string> check_edge_label(const std::string& label, const CanonicalRules& rules);

ValidationReport validate_canonical(const SceneGraph& graph, const CanonicalRules& rules = CanonicalRules::defaults());

nlohmann::ordered_json violation_to_json(const CanonicalViolation& v);
nlohmann::ordered_json canonical_report_to_json(const ValidationReport& report);

}  // namespace crs
