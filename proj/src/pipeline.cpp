#include "crs/pipeline.hpp"

#include <cmath>
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "crs/error.hpp"
#include "crs/graph_io.hpp"
#include "crs/rng.hpp"

namespace crs {

using ordered_json = nlohmann::ordered_json;

GenerationConfig GenerationConfig::from_catalog(const Catalog& catalog) {
  GenerationConfig c;
  c.option_count = catalog.option_count;
  c.nota_decoy_probability = catalog.nota_decoy_probability;
  c.nota_correct_probability = catalog.nota_correct_probability;
  c.fact_budget = FactBudget::from_catalog(catalog);
  return c;
}

void GenerationConfig::merge(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("config: document is not an object");
  static const std::set<std::string> known = {"window",        "frame_stride",  "seed",
                                              "templates",     "option_count",  "none_of_the_above_decoy",
                                              "none_of_the_above_correct", "hop_cap", "fact_budget",
                                              "emit_cot",      "max_samples_per_selection", "jobs",
                                              "anchor_weights"};
  try {
    for (const auto& [key, value] : doc.items()) {
      if (!known.count(key)) throw SchemaError("config: unknown key '" + key + "'");
    }
    if (doc.contains("window")) window = doc["window"].get<int>();
    if (doc.contains("frame_stride")) frame_stride = doc["frame_stride"].get<int>();
    if (doc.contains("seed")) master_seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("templates")) {
      templates_enabled.clear();
      for (const auto& name : doc["templates"].get<std::vector<std::string>>()) {
        auto id = parse_template_id(name);
        if (!id) throw SchemaError("config: unknown template '" + name + "'");
        templates_enabled.insert(*id);
      }
    }
    if (doc.contains("option_count")) option_count = doc["option_count"].get<int>();
    if (doc.contains("none_of_the_above_decoy")) nota_decoy_probability = doc["none_of_the_above_decoy"].get<double>();
    if (doc.contains("none_of_the_above_correct")) {
      nota_correct_probability = doc["none_of_the_above_correct"].get<double>();
    }
    if (doc.contains("hop_cap")) hop_cap = doc["hop_cap"].get<int>();
    if (doc.contains("fact_budget")) {
      auto b = doc["fact_budget"].get<std::vector<int>>();
      if (b.size() != 3) throw SchemaError("config: fact_budget needs three integers");
      fact_budget = {b[0], b[1], b[2]};
    }
    if (doc.contains("emit_cot")) emit_cot = doc["emit_cot"].get<bool>();
    if (doc.contains("max_samples_per_selection")) {
      max_samples_per_selection = doc["max_samples_per_selection"].get<int>();
    }
    if (doc.contains("jobs")) jobs = doc["jobs"].get<int>();
    if (doc.contains("anchor_weights")) {
      weights.clear();
      for (const auto& [name, w] : doc["anchor_weights"].items()) {
        bool found = false;
        for (auto kind : {AnchorKind::NodeType, AnchorKind::Property, AnchorKind::Relation, AnchorKind::PointMarker}) {
          if (anchor_kind_name(kind) == name) {
            weights[kind] = w.get<double>();
            found = true;
          }
        }
        if (!found) throw SchemaError("config: unknown anchor kind '" + name + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

void GenerationConfig::validate() const {
  if (window < 1) throw RangeError("window must be at least 1");
  if (frame_stride < 1) throw RangeError("frame stride must be at least 1");
  if (option_count < 2) throw RangeError("option count must be at least 2");
  for (double p : {nota_decoy_probability, nota_correct_probability}) {
    if (p < 0.0 || p > 1.0) throw RangeError("probabilities must lie in [0,1]");
  }
  if (hop_cap < 0) throw RangeError("hop cap must be non-negative");
  if (fact_budget.properties < 0 || fact_budget.relations < 0 || fact_budget.neighbor_properties < 0) {
    throw RangeError("fact budget entries must be non-negative");
  }
  if (max_samples_per_selection < 1) throw RangeError("max samples per selection must be at least 1");
  if (jobs < 1) throw RangeError("jobs must be at least 1");
}

ordered_json GenerationConfig::to_json() const {
  ordered_json out;
  out["window"] = window;
  out["frame_stride"] = frame_stride;
  out["seed"] = master_seed;
  std::vector<std::string> names;
  for (const auto& t : all_templates()) {
    if (enabled(t.id)) names.emplace_back(t.name);
  }
  out["templates"] = names;
  out["option_count"] = option_count;
  out["none_of_the_above_decoy"] = nota_decoy_probability;
  out["none_of_the_above_correct"] = nota_correct_probability;
  out["hop_cap"] = hop_cap;
  out["fact_budget"] = {fact_budget.properties, fact_budget.relations, fact_budget.neighbor_properties};
  out["emit_cot"] = emit_cot;
  out["max_samples_per_selection"] = max_samples_per_selection;
  return out;
}

std::vector<Frame> queried_frames(const SceneGraph& graph, int window, int stride) {
  std::vector<Frame> out;
  if (window < 1 || stride < 1) return out;
  for (Frame t = graph.frame_range.first + window - 1; t <= graph.frame_range.last; t += stride) out.push_back(t);
  return out;
}

std::uint64_t sample_seed(std::uint64_t master, const std::string& scene_id, Frame t, std::string_view template_name,
                          std::size_t selection_index, int repeat) {
  return SeedBuilder(master)
      .add(scene_id)
      .add(static_cast<std::uint64_t>(static_cast<std::int64_t>(t)))
      .add(template_name)
      .add(static_cast<std::uint64_t>(selection_index))
      .add(static_cast<std::uint64_t>(repeat))
      .value();
}

namespace {

std::string sample_id(const std::string& scene, Frame t, std::string_view tpl, std::size_t index, int repeat) {
  std::ostringstream ss;
  ss << scene << ":" << std::setw(4) << std::setfill('0') << t << ":" << tpl << ":" << index;
  if (repeat > 0) ss << ":" << repeat;
  return ss.str();
}

}  // namespace

GenerationResult generate_scene(const SceneGraph& graph, const GenerationConfig& config, const Catalog& catalog) {
  config.validate();
  GenerationResult result;
  PlanConfig pc;
  pc.hop_cap = config.hop_cap;
  pc.window = config.window;
  pc.option_count = config.option_count;
  pc.nota_decoy_probability = config.nota_decoy_probability;
  pc.nota_correct_probability = config.nota_correct_probability;
  pc.weights = config.weights;

  for (Frame t : queried_frames(graph, config.window, config.frame_stride)) {
    ++result.queried_frames;
    FrameGraph fg = frame_view(graph, t);
    PlanContext ctx{graph, fg, catalog, pc};
    std::vector<Frame> frames;
    for (Frame f = t - config.window + 1; f <= t; ++f) frames.push_back(f);

    for (const auto& tpl : all_templates()) {
      if (!config.enabled(tpl.id)) continue;
      bool gated = false;
      for (const auto& type : completeness_types(tpl, catalog)) {
        if (!is_complete(graph, t, type)) gated = true;
      }
      if (gated) continue;

      auto selections = select(tpl, graph, fg, catalog, config.window);
      for (std::size_t i = 0; i < selections.size(); ++i) {
        std::set<std::string> questions;
        for (int r = 0; r < config.max_samples_per_selection; ++r) {
          auto seed = sample_seed(config.master_seed, graph.scene_id, t, tpl.name, i, r);
          Rng rng(seed);
          auto outcome = plan(tpl, ctx, selections[i], i, rng);
          if (!outcome.plan) {
            result.diagnostics.push_back(
                {graph.scene_id, t, std::string(tpl.name), selections[i].key(), outcome.rejection});
            break;
          }
          auto& p = *outcome.plan;
          if (!questions.insert(p.question).second) continue;
          p.rng_seed = seed;

          Sample s;
          s.sample_id = sample_id(graph.scene_id, t, tpl.name, i, r);
          s.scene_id = graph.scene_id;
          s.frames = frames;
          for (Frame f : frames) {
            if (auto it = graph.images.find(f); it != graph.images.end()) s.image_refs[f] = it->second;
          }
          s.question = p.question;
          s.options.push_back(p.correct_option);
          for (const auto& d : p.decoys) s.options.push_back(d.text);
          Rng order(SeedBuilder(seed).add("options").value());
          order.shuffle(s.options);
          s.correct_index = static_cast<std::size_t>(
              std::find(s.options.begin(), s.options.end(), p.correct_option) - s.options.begin());
          if (config.emit_cot) {
            Rng cot_rng(SeedBuilder(seed).add("cot").value());
            s.cot = build_cot(p, fg, catalog, cot_rng, config.fact_budget);
          }
          s.plan = std::move(p);
          result.samples.push_back(std::move(s));
        }
      }
    }
  }
  return result;
}

GenerationResult generate(const std::vector<SceneGraph>& scenes, const GenerationConfig& config,
                          const Catalog& catalog) {
  config.validate();
  std::vector<const SceneGraph*> order;
  for (const auto& s : scenes) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const SceneGraph* a, const SceneGraph* b) { return a->scene_id < b->scene_id; });

  std::vector<GenerationResult> parts(order.size());
  std::vector<std::string> errors(order.size());
  auto work = [&](std::size_t i) {
    try {
      parts[i] = generate_scene(*order[i], config, catalog);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  };
  std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), order.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < order.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < order.size(); i = next++) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  GenerationResult out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!errors[i].empty()) {
      out.diagnostics.push_back({order[i]->scene_id, std::nullopt, {}, {}, "scene skipped: " + errors[i]});
      continue;
    }
    out.queried_frames += parts[i].queried_frames;
    for (auto& s : parts[i].samples) out.samples.push_back(std::move(s));
    for (auto& d : parts[i].diagnostics) out.diagnostics.push_back(std::move(d));
  }
  return out;
}

ordered_json sample_to_json(const Sample& s) {
  const auto& tpl = template_info(s.plan.template_id);
  ordered_json out;
  out["schema_version"] = kSampleSchemaVersion;
  out["sample_id"] = s.sample_id;
  out["scene_id"] = s.scene_id;
  out["frames"] = s.frames;
  ordered_json images = ordered_json::object();
  for (const auto& [f, cams] : s.image_refs) {
    ordered_json per = ordered_json::object();
    for (const auto& [cam, path] : cams) per[std::string(camera_name(cam))] = path;
    images[std::to_string(f)] = per;
  }
  out["image_refs"] = images;
  out["question"] = s.question;
  out["options"] = s.options;
  out["correct_index"] = s.correct_index;
  if (s.cot) out["cot"] = cot_to_json(*s.cot);

  auto plan = plan_to_json(s.plan);
  ordered_json meta;
  meta["template_id"] = std::string(tpl.name);
  meta["family"] = std::string(family_name(tpl.family));
  meta["bucket"] = std::string(bucket_name(tpl.bucket));
  meta["reasoning_split"] = std::string(split_name(tpl.split));
  meta["reasoning_depth"] = s.plan.reasoning_depth;
  meta["template_traversals"] = s.plan.traversals;
  meta["rng_seed"] = s.plan.rng_seed;
  meta["frame"] = s.plan.frame;
  meta["selection"] = plan["selection"];
  meta["selection_index"] = s.plan.selection_index;
  meta["target_nodes"] = plan["target_nodes"];
  meta["answer"] = s.plan.answer_text;
  meta["correct_is_none_of_the_above"] = s.plan.correct_is_nota;
  meta["decoys"] = plan["decoys"];
  meta["descriptors"] = plan["descriptors"];
  meta["facts"] = plan["facts"];
  if (plan.contains("answer_counts")) meta["answer_counts"] = plan["answer_counts"];
  out["metadata"] = meta;
  return out;
}

std::string samples_to_jsonl(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) out += sample_to_json(s).dump() + "\n";
  return out;
}

ordered_json diagnostics_to_json(const GenerationResult& result) {
  ordered_json out;
  out["samples"] = result.samples.size();
  out["queried_frames"] = result.queried_frames;
  ordered_json skipped = ordered_json::array();
  ordered_json rejected = ordered_json::array();
  for (const auto& d : result.diagnostics) {
    ordered_json j;
    j["scene_id"] = d.scene_id;
    if (d.frame) j["frame"] = *d.frame;
    if (!d.template_id.empty()) j["template_id"] = d.template_id;
    if (!d.selection.empty()) j["selection"] = d.selection;
    j["reason"] = d.reason;
    (d.frame ? rejected : skipped).push_back(j);
  }
  out["skipped_scenes"] = skipped;
  out["rejected_plans"] = rejected;
  return out;
}

std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs) {
  std::vector<std::filesystem::path> out;
  for (const auto& in : inputs) {
    if (std::filesystem::is_directory(in)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(in);
    }
  }
  return out;
}

LoadedScenes load_scenes(const std::vector<std::filesystem::path>& inputs) {
  LoadedScenes out;
  for (const auto& path : expand_inputs(inputs)) {
    try {
      out.scenes.push_back(load_graph(path));
    } catch (const Error& e) {
      out.diagnostics.push_back({path.string(), std::nullopt, {}, {}, "scene skipped: " + std::string(e.what())});
    }
  }
  return out;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::vector<nlohmann::json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string write_jsonl(const std::vector<nlohmann::json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

StatsReport compute_stats(const std::vector<SceneGraph>& scenes, int window, const Catalog& catalog, int stride) {
  StatsReport r;
  r.scenes = scenes.size();
  const auto& lane = catalog.type("lane");
  const auto& crossing = catalog.type("crossing");
  for (const auto& g : scenes) {
    for (Frame t : queried_frames(g, window, stride)) {
      auto fg = frame_view(g, t);
      ++r.frame_graphs;
      r.nodes += fg.nodes.size();
      r.edges += fg.edges.size();
      for (const auto& n : fg.nodes) {
        r.properties += n.properties.size();
        if (n.is_unique) ++r.unique_node_anchors;
        r.unique_property_anchors += n.unique_property_keys.size();
      }
      for (const auto& e : fg.edges) {
        if (e.is_unique) ++r.unique_edge_anchors;
      }
      if (is_complete(g, t, lane)) ++r.lane_complete;
      if (is_complete(g, t, crossing)) ++r.crossing_complete;
    }
  }
  return r;
}

namespace {

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

double round_to(double v, int digits) {
  double scale = std::pow(10.0, digits);
  return std::round(v * scale) / scale;
}

struct StatRow {
  std::string key;
  std::string label;
  std::optional<std::size_t> total;
  double mean;
  std::string unit;
};

std::vector<StatRow> stat_rows(const StatsReport& r) {
  double m = static_cast<double>(r.frame_graphs);
  double n = static_cast<double>(r.nodes);
  return {
      {"evaluated_frame_graphs", "Evaluated frame graphs", r.frame_graphs, ratio(m, static_cast<double>(r.scenes)),
       "per CRS graph"},
      {"node_observations", "Node observations", r.nodes, ratio(n, m), "per G_t"},
      {"edge_observations", "Directed edge observations", r.edges, ratio(static_cast<double>(r.edges), m), "per G_t"},
      {"property_entries", "Node-property entries", r.properties, ratio(static_cast<double>(r.properties), m),
       "per G_t"},
      {"edge_incidence", "Incoming/outgoing edge incidence 2|E_t|/|N_t|", std::nullopt,
       ratio(2.0 * static_cast<double>(r.edges), n), "per node"},
      {"property_density", "Node-property density", std::nullopt, ratio(static_cast<double>(r.properties), n),
       "per node"},
      {"lane_complete", "Lane-complete frame graphs, c_t(lane)=1", r.lane_complete,
       100.0 * ratio(static_cast<double>(r.lane_complete), m), "percent of G_t"},
      {"crossing_complete", "Crossing-complete frame graphs, c_t(crossing)=1", r.crossing_complete,
       100.0 * ratio(static_cast<double>(r.crossing_complete), m), "percent of G_t"},
      {"unique_node_anchors", "Unique node anchors", r.unique_node_anchors,
       ratio(static_cast<double>(r.unique_node_anchors), m), "per G_t"},
      {"unique_edge_anchors", "Unique edge anchors", r.unique_edge_anchors,
       ratio(static_cast<double>(r.unique_edge_anchors), m), "per G_t"},
      {"unique_property_anchors", "Unique property anchors", r.unique_property_anchors,
       ratio(static_cast<double>(r.unique_property_anchors), m), "per G_t"},
  };
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

ordered_json stats_to_json(const StatsReport& r) {
  ordered_json out;
  out["scenes"] = r.scenes;
  ordered_json rows = ordered_json::object();
  for (const auto& row : stat_rows(r)) {
    ordered_json j;
    j["label"] = row.label;
    if (row.total) {
      j["total"] = *row.total;
    } else {
      j["total"] = nullptr;
    }
    j["mean"] = round_to(row.mean, 4);
    j["unit"] = row.unit;
    rows[row.key] = j;
  }
  out["statistics"] = rows;
  return out;
}

std::string stats_to_text(const StatsReport& r) {
  std::ostringstream ss;
  ss << std::left << std::setw(50) << "Statistic" << std::right << std::setw(10) << "Total" << std::setw(10) << "Mean"
     << "  Unit\n";
  for (const auto& row : stat_rows(r)) {
    ss << std::left << std::setw(50) << row.label << std::right << std::setw(10)
       << (row.total ? std::to_string(*row.total) : std::string("--")) << std::setw(10)
       << fixed(row.mean, row.unit == "percent of G_t" ? 1 : 2) << "  " << row.unit << "\n";
  }
  return ss.str();
}

std::vector<nlohmann::json> validation_split(const std::vector<nlohmann::json>& samples, std::uint64_t seed) {
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::string tpl = s.at("metadata").at("template_id").get<std::string>();
    std::string scene = s.at("scene_id").get<std::string>();
    groups[{tpl, scene}].push_back(i);
  }
  Rng rng(SeedBuilder(seed).add("validation_split").value());
  std::vector<std::size_t> keep;
  for (const auto& [key, idx] : groups) keep.push_back(idx[rng.uniform(idx.size())]);
  std::sort(keep.begin(), keep.end());
  std::vector<nlohmann::json> out;
  for (auto i : keep) out.push_back(samples[i]);
  return out;
}

std::vector<ReportRow> question_type_report(const std::vector<nlohmann::json>& samples) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples) ++counts[s.at("metadata").at("template_id").get<std::string>()];
  std::vector<ReportRow> rows;
  for (const auto& t : all_templates()) {
    auto it = counts.find(std::string(t.name));
    if (it == counts.end()) continue;
    rows.push_back({std::string(t.name), it->second, std::string(bucket_name(t.bucket)),
                    std::string(split_name(t.split))});
    counts.erase(it);
  }
  for (const auto& [name, n] : counts) rows.push_back({name, n, "unknown", "unknown"});
  return rows;
}

ordered_json report_to_json(const std::vector<ReportRow>& rows) {
  ordered_json out = ordered_json::array();
  for (const auto& r : rows) {
    out.push_back(ordered_json{
        {"template_id", r.template_id}, {"count", r.count}, {"bucket", r.bucket}, {"reasoning_split", r.reasoning_split}});
  }
  return out;
}

std::string report_to_text(const std::vector<ReportRow>& rows) {
  if (rows.empty()) return {};
  std::ostringstream ss;
  ss << std::left << std::setw(40) << "template_id" << std::right << std::setw(8) << "count" << "  " << std::left
     << std::setw(12) << "bucket" << "reasoning_split\n";
  std::size_t total = 0;
  for (const auto& r : rows) {
    ss << std::left << std::setw(40) << r.template_id << std::right << std::setw(8) << r.count << "  " << std::left
       << std::setw(12) << r.bucket << r.reasoning_split << "\n";
    total += r.count;
  }
  ss << std::left << std::setw(40) << "total" << std::right << std::setw(8) << total << "\n";
  return ss.str();
}

}  // namespace crs
