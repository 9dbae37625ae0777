#pragma once

// Dataset generation over scenes and temporal windows, corpus statistics,
// the validation split and the per-template report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/catalog.hpp"
#include "crs/cot.hpp"
#include "crs/graph.hpp"
#include "crs/templates.hpp"

namespace crs {

inline constexpr int kSampleSchemaVersion = 1;

struct GenerationConfig {
  int window = 4;
  int frame_stride = 1;
  std::uint64_t master_seed = 0;
  std::set<TemplateId> templates_enabled;  // empty = all
  int option_count = 4;
  double nota_decoy_probability = 0.15;
  double nota_correct_probability = 0.05;
  int hop_cap = 2;
  FactBudget fact_budget;
  bool emit_cot = true;
  int max_samples_per_selection = 1;
  int jobs = 1;
  AnchorWeights weights;

  static GenerationConfig from_catalog(const Catalog& catalog);
  /// Applies the keys present in a JSON config document. Throws SchemaError.
  void merge(const nlohmann::json& doc);
  /// Throws RangeError on out-of-range values.
  void validate() const;
  bool enabled(TemplateId id) const { return templates_enabled.empty() || templates_enabled.count(id); }
  nlohmann::ordered_json to_json() const;
};

struct Sample {
  std::string sample_id;
  std::string scene_id;
  std::vector<Frame> frames;
  std::map<Frame, std::map<Camera, std::string>> image_refs;
  std::string question;
  std::vector<std::string> options;
  std::size_t correct_index = 0;
  std::optional<CoTTrace> cot;
  SamplePlan plan;
};

struct Diagnostic {
  std::string scene_id;
  std::optional<Frame> frame;
  std::string template_id;
  std::string selection;
  std::string reason;
};

struct GenerationResult {
  std::vector<Sample> samples;
  std::vector<Diagnostic> diagnostics;
  std::size_t queried_frames = 0;
};

/// Frames t with t >= first + w - 1, stepping by the stride.
std::vector<Frame> queried_frames(const SceneGraph& graph, int window, int stride = 1);

std::uint64_t sample_seed(std::uint64_t master, const std::string& scene_id, Frame t, std::string_view template_name,
                          std::size_t selection_index, int repeat = 0);

GenerationResult generate_scene(const SceneGraph& graph, const GenerationConfig& config, const Catalog& catalog);
/// Scenes are processed in scene_id order; output order does not depend on `jobs`.
GenerationResult generate(const std::vector<SceneGraph>& scenes, const GenerationConfig& config,
                          const Catalog& catalog);

nlohmann::ordered_json sample_to_json(const Sample& sample);
std::string samples_to_jsonl(const std::vector<Sample>& samples);
nlohmann::ordered_json diagnostics_to_json(const GenerationResult& result);

/// Loads scene files; unreadable or invalid ones become diagnostics.
struct LoadedScenes {
  std::vector<SceneGraph> scenes;
  std::vector<Diagnostic> diagnostics;
};
LoadedScenes load_scenes(const std::vector<std::filesystem::path>& inputs);
/// Expands directories into their *.json files, sorted.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string write_jsonl(const std::vector<nlohmann::json>& records);

struct StatsReport {
  std::size_t scenes = 0;
  std::size_t frame_graphs = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t properties = 0;
  std::size_t lane_complete = 0;
  std::size_t crossing_complete = 0;
  std::size_t unique_node_anchors = 0;
  std::size_t unique_edge_anchors = 0;
  std::size_t unique_property_anchors = 0;
};

StatsReport compute_stats(const std::vector<SceneGraph>& scenes, int window, const Catalog& catalog, int stride = 1);
nlohmann::ordered_json stats_to_json(const StatsReport& report);
std::string stats_to_text(const StatsReport& report);

/// At most one sample per (template_id, scene_id), chosen uniformly with the
/// seed; kept samples stay in input order.
std::vector<nlohmann::json> validation_split(const std::vector<nlohmann::json>& samples, std::uint64_t seed);

struct ReportRow {
  std::string template_id;
  std::size_t count = 0;
  std::string bucket;
  std::string reasoning_split;
};
std::vector<ReportRow> question_type_report(const std::vector<nlohmann::json>& samples);
nlohmann::ordered_json report_to_json(const std::vector<ReportRow>& rows);
std::string report_to_text(const std::vector<ReportRow>& rows);

}  // namespace crs
