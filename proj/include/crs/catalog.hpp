#pragma once

// Versioned template catalog: every English surface string, decoy vocabulary
// and probability used by the query templates and the reasoning traces.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/descriptor.hpp"

namespace crs {

inline constexpr int kCatalogVersion = 1;

struct TemplateStrings {
  std::string id;
  std::string property_key;
  std::map<std::string, std::string> strings;
  std::vector<std::string> vocabulary;
  std::vector<std::string> extra_decoys;

  /// Throws SchemaError naming the template when the string is missing.
  const std::string& str(const std::string& key) const;
};

struct Catalog {
  int version = kCatalogVersion;
  int option_count = 4;
  std::string nota_text;
  double nota_decoy_probability = 0.0;
  double nota_correct_probability = 0.0;
  RenderStyle render;

  std::map<std::string, std::string> types;   // role -> node type
  std::vector<std::string> actor_types;
  std::map<std::string, std::string> labels;  // role -> edge label
  std::map<std::string, std::string> direction_values;
  std::map<std::string, std::string> direction_phrases;
  std::map<std::string, std::string> side_phrases;

  std::map<std::string, std::string> cot;
  std::vector<int> fact_budget;
  std::map<std::string, std::vector<std::string>> property_priority;
  std::map<std::string, std::vector<std::string>> relation_priority;

  std::map<std::string, TemplateStrings> templates;

  const std::string& type(const std::string& role) const;
  const std::string& label(const std::string& role) const;
  const std::string& cot_str(const std::string& key) const;
  const TemplateStrings& tpl(const std::string& id) const;
  bool is_actor(const std::string& node_type) const;
};

/// Validates and converts a catalog document; throws SchemaError listing
/// every problem found.
Catalog catalog_from_json(const nlohmann::json& doc);
Catalog load_catalog(const std::filesystem::path& path);

/// The catalog shipped in data/, compiled into the library.
const std::string& default_catalog_text();
const Catalog& default_catalog();

}  // namespace crs
