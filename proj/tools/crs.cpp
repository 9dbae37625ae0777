#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "crs/annotation.hpp"
#include "crs/canonical.hpp"
#include "crs/graph_io.hpp"
#include "crs/pipeline.hpp"
#include "crs/scaffold.hpp"
#include "crs/server.hpp"
#include "crs/uniqueness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string data_dir;
  std::string format = "text";
  std::string catalog;
  int jobs = 0;
};

class Catalogs {
 public:
  explicit Catalogs(const Common& c) : path_(c.catalog) {}
  const crs::Catalog& get() {
    if (path_.empty()) return crs::default_catalog();
    if (!loaded_) loaded_ = crs::load_catalog(path_);
    return *loaded_;
  }

 private:
  std::string path_;
  std::optional<crs::Catalog> loaded_;
};

void add_common(CLI::App* app, Common& c, bool seed, bool out, bool data_dir, bool format, bool jobs) {
  if (seed) app->add_option("--seed", c.seed, "Master RNG seed (overrides the config file)");
  if (out) app->add_option("--out", c.out, "Output path; '-' or omitted writes to stdout");
  if (data_dir) app->add_option("--data-dir", c.data_dir, "Annotation store directory");
  if (format) app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"text", "json"}));
  if (jobs) app->add_option("--jobs", c.jobs, "Worker threads across scenes (overrides the config file)")
                ->check(CLI::PositiveNumber);
  app->add_option("--config", c.config, "JSON config file; flags take precedence")->check(CLI::ExistingFile);
  app->add_option("--catalog", c.catalog, "Template catalog JSON (default: the built-in catalog)")
      ->check(CLI::ExistingFile);
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  fs::path p(c.out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  crs::write_text_file(p, text);
}

json read_config(const Common& c) {
  if (c.config.empty()) return json::object();
  return crs::parse_json_file(c.config);
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void print_diagnostics(const std::vector<crs::Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << "warning: " << d.scene_id << ": " << d.reason << "\n";
}

// --- ingest --------------------------------------------------------------

struct IngestArgs {
  std::string scaffold;
  bool accept = false;
  bool no_transfer = false;
};

int run_ingest(const IngestArgs& a, const Common& c, Catalogs& cats) {
  const auto& catalog = cats.get();
  auto scaffold = crs::load_scaffold(a.scaffold);
  auto graph = crs::graph_shell(scaffold);
  if (!a.no_transfer) {
    for (const auto& e : scaffold.elements) crs::transfer_node(e, graph, catalog);
  }
  std::size_t accepted = 0;
  if (a.accept) {
    for (const auto& p : crs::auto_edges(graph, scaffold, catalog).proposals) {
      crs::accept_proposal(graph, p);
      ++accepted;
    }
  }
  auto remaining = crs::auto_edges(graph, scaffold, catalog);

  ordered_json proposals = ordered_json::array();
  for (const auto& p : remaining.proposals) proposals.push_back(crs::proposal_to_json(p));

  if (!c.data_dir.empty()) {
    crs::AnnotationStore store(c.data_dir, catalog);
    store.create_scene(graph, &scaffold);
  }

  ordered_json summary;
  summary["scene_id"] = graph.scene_id;
  summary["elements"] = scaffold.counts();
  summary["nodes"] = graph.nodes.size();
  summary["edges"] = graph.edges.size();
  summary["accepted_proposals"] = accepted;
  summary["open_proposals"] = remaining.proposals.size();
  summary["skipped_links"] = remaining.skipped_links;

  if (!c.out.empty() && c.out != "-") {
    fs::path dir(c.out);
    fs::create_directories(dir);
    crs::save_graph(dir / (graph.scene_id + ".json"), graph);
    ordered_json doc;
    doc["scene_id"] = graph.scene_id;
    doc["proposals"] = proposals;
    doc["skipped_links"] = remaining.skipped_links;
    crs::write_text_file(dir / (graph.scene_id + ".proposals.json"), doc.dump(2) + "\n");
  } else if (c.data_dir.empty()) {
    std::cout << crs::serialize_graph(graph);
  }

  if (c.format == "json") {
    std::cerr << summary.dump() << "\n";
  } else {
    std::cerr << "scene " << graph.scene_id << ": " << graph.nodes.size() << " nodes, " << graph.edges.size()
              << " edges, " << remaining.proposals.size() << " open proposals, " << remaining.skipped_links
              << " skipped links\n";
  }
  return kOk;
}

// --- validate -------------------------------------------------------------

struct ValidateArgs {
  std::vector<std::string> inputs;
  std::optional<int> frame;
  int window = 4;
};

int run_validate(const ValidateArgs& a, const Common& c, Catalogs& cats) {
  auto loaded = crs::load_scenes(to_paths(a.inputs));
  ordered_json scenes = ordered_json::array();
  std::string text;
  std::size_t flagged = 0;
  for (const auto& g : loaded.scenes) {
    auto report = crs::validate_canonical(g);
    auto anchors = crs::check_all_anchors(g);
    ordered_json entry;
    entry["scene_id"] = g.scene_id;
    entry["canonical"] = crs::canonical_report_to_json(report);
    ordered_json collisions = ordered_json::array();
    for (const auto& v : report) {
      text += g.scene_id + "\t" + std::string(crs::operator_name(v.op)) + "\t" + v.element_id + "\t" + v.rule + "\t" +
              v.detail + "\n";
    }
    for (const auto& check : anchors) {
      if (check.unique()) continue;
      collisions.push_back(crs::anchor_check_to_json(check));
      std::string ids;
      for (const auto& id : check.collides_with()) ids += (ids.empty() ? "" : ", ") + id;
      text += g.scene_id + "\tanchor\t" + check.anchor + "\tcollision\tcollides-with: [" + ids + "]\n";
    }
    entry["anchor_collisions"] = collisions;
    flagged += report.size() + collisions.size();
    if (a.frame) entry["preview"] = crs::query_preview(g, *a.frame, cats.get(), a.window);
    scenes.push_back(entry);
  }
  for (const auto& d : loaded.diagnostics) text += d.scene_id + "\terror\t-\tload\t" + d.reason + "\n";

  if (c.format == "json") {
    ordered_json doc;
    doc["scenes"] = scenes;
    doc["violations"] = flagged;
    ordered_json errs = ordered_json::array();
    for (const auto& d : loaded.diagnostics) errs.push_back({{"path", d.scene_id}, {"reason", d.reason}});
    doc["load_errors"] = errs;
    emit(c, doc.dump(2) + "\n");
  } else {
    if (a.frame) {
      for (const auto& s : scenes) {
        for (const auto& row : s["preview"]["templates"]) {
          text += s["scene_id"].get<std::string>() + "\tpreview\t" + row["template_id"].get<std::string>() + "\t" +
                  (row["available"].get<bool>() ? "available" : "unavailable") + "\n";
        }
      }
    }
    text += std::to_string(flagged) + " violation(s) in " + std::to_string(loaded.scenes.size()) + " scene(s)\n";
    emit(c, text);
  }
  if (!loaded.diagnostics.empty() || flagged > 0) {
    std::cerr << "error: kind=validation message=\"" << flagged << " violation(s), " << loaded.diagnostics.size()
              << " unreadable file(s)\"\n";
    return kData;
  }
  return kOk;
}

// --- generate --------------------------------------------------------------

struct GenerateArgs {
  std::vector<std::string> inputs;
  std::optional<int> window;
  std::optional<int> stride;
  std::vector<std::string> templates;
  bool no_cot = false;
  std::string diagnostics;
};

crs::GenerationConfig build_config(const Common& c, Catalogs& cats, const std::optional<int>& window,
                                   const std::optional<int>& stride) {
  auto config = crs::GenerationConfig::from_catalog(cats.get());
  config.merge(read_config(c));
  if (c.seed) config.master_seed = *c.seed;
  if (c.jobs > 0) config.jobs = c.jobs;
  if (window) config.window = *window;
  if (stride) config.frame_stride = *stride;
  return config;
}

std::vector<crs::SceneGraph> scenes_from(const std::vector<std::string>& inputs, const Common& c, Catalogs& cats,
                                         std::vector<crs::Diagnostic>& diags) {
  if (inputs.empty() && !c.data_dir.empty()) {
    crs::AnnotationStore store(c.data_dir, cats.get());
    std::vector<crs::SceneGraph> out;
    for (const auto& id : store.list_scenes()) out.push_back(store.graph(id));
    return out;
  }
  if (inputs.empty()) throw crs::InvalidCommandError("no input scenes (give paths or --data-dir)");
  auto loaded = crs::load_scenes(to_paths(inputs));
  diags = loaded.diagnostics;
  return loaded.scenes;
}

int run_generate(const GenerateArgs& a, const Common& c, Catalogs& cats) {
  auto config = build_config(c, cats, a.window, a.stride);
  if (!a.templates.empty()) {
    config.templates_enabled.clear();
    for (const auto& name : a.templates) {
      auto id = crs::parse_template_id(name);
      if (!id) throw crs::InvalidCommandError("unknown template '" + name + "'");
      config.templates_enabled.insert(*id);
    }
  }
  if (a.no_cot) config.emit_cot = false;
  config.validate();

  std::vector<crs::Diagnostic> load_diags;
  auto scenes = scenes_from(a.inputs, c, cats, load_diags);
  auto result = crs::generate(scenes, config, cats.get());
  result.diagnostics.insert(result.diagnostics.begin(), load_diags.begin(), load_diags.end());

  emit(c, crs::samples_to_jsonl(result.samples));

  std::string sidecar = a.diagnostics;
  if (sidecar.empty() && !c.out.empty() && c.out != "-") sidecar = c.out + ".diagnostics.json";
  if (!sidecar.empty()) {
    auto doc = crs::diagnostics_to_json(result);
    doc["config"] = config.to_json();
    crs::write_text_file(sidecar, doc.dump(2) + "\n");
  }
  print_diagnostics(load_diags);
  std::cerr << result.samples.size() << " samples from " << scenes.size() << " scene(s), " << result.queried_frames
            << " queried frames\n";
  return load_diags.empty() ? kOk : kData;
}

// --- stats / split / report -----------------------------------------------

struct StatsArgs {
  std::vector<std::string> inputs;
  std::optional<int> window;
  std::optional<int> stride;
};

int run_stats(const StatsArgs& a, const Common& c, Catalogs& cats) {
  auto config = build_config(c, cats, a.window, a.stride);
  config.validate();
  std::vector<crs::Diagnostic> diags;
  auto scenes = scenes_from(a.inputs, c, cats, diags);
  auto report = crs::compute_stats(scenes, config.window, cats.get(), config.frame_stride);
  emit(c, c.format == "json" ? crs::stats_to_json(report).dump(2) + "\n" : crs::stats_to_text(report));
  print_diagnostics(diags);
  return diags.empty() ? kOk : kData;
}

struct SplitArgs {
  std::string input;
};

int run_split(const SplitArgs& a, const Common& c) {
  std::uint64_t seed = 0;
  auto cfg = read_config(c);
  if (cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
  if (c.seed) seed = *c.seed;
  auto kept = crs::validation_split(crs::read_jsonl(a.input), seed);
  emit(c, crs::write_jsonl(kept));
  std::cerr << kept.size() << " samples in the validation split\n";
  return kOk;
}

struct ReportArgs {
  std::string input;
};

int run_report(const ReportArgs& a, const Common& c) {
  auto rows = crs::question_type_report(crs::read_jsonl(a.input));
  emit(c, c.format == "json" ? crs::report_to_json(rows).dump(2) + "\n" : crs::report_to_text(rows));
  return kOk;
}

// --- serve -----------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string images;
  std::size_t snapshot_interval = 50;
  bool no_fsync = false;
};

crs::AnnotationServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const ServeArgs& a, const Common& c, Catalogs& cats) {
  if (c.data_dir.empty()) throw crs::InvalidCommandError("serve needs --data-dir");
  crs::StoreOptions so;
  so.snapshot_interval = a.snapshot_interval;
  so.fsync = !a.no_fsync;
  crs::AnnotationStore store(c.data_dir, cats.get(), so);
  crs::ServerOptions opts;
  opts.host = a.host;
  opts.port = a.port;
  opts.image_root = a.images;
  crs::AnnotationServer server(store, cats.get(), opts);
  int port = server.bind();
  std::cout << "listening on " << a.host << ":" << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return kOk;
}

std::string quote(const std::string& s) { return json(s).dump(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-graph question generation toolkit"};
  app.name("crs");
  app.require_subcommand(1);
  app.set_version_flag("--version", "crs 1.0.0");

  Common common;
  IngestArgs ingest_args;
  ValidateArgs validate_args;
  GenerateArgs generate_args;
  StatsArgs stats_args;
  SplitArgs split_args;
  ReportArgs report_args;
  ServeArgs serve_args;

  auto* ingest = app.add_subcommand("ingest", "Turn a scaffold into an initial scene graph plus edge proposals");
  ingest->add_option("scaffold", ingest_args.scaffold, "Scaffold JSON file")->required()->check(CLI::ExistingFile);
  ingest->add_flag("--accept-proposals", ingest_args.accept, "Accept every edge proposal");
  ingest->add_flag("--no-transfer", ingest_args.no_transfer, "Create an empty graph instead of transferring all elements");
  add_common(ingest, common, false, true, true, true, false);

  auto* validate = app.add_subcommand("validate", "Check canonical form and uniqueness anchors of scene graphs");
  validate->add_option("inputs", validate_args.inputs, "Scene graph files or directories")->required();
  validate->add_option("--frame", validate_args.frame, "Also list template availability at this frame");
  validate->add_option("--window", validate_args.window, "Temporal window for the availability listing")
      ->check(CLI::PositiveNumber);
  add_common(validate, common, false, true, false, true, false);

  auto* generate = app.add_subcommand("generate", "Generate question samples as JSONL");
  generate->add_option("inputs", generate_args.inputs, "Scene graph files or directories");
  generate->add_option("--window", generate_args.window, "Temporal window length w")->check(CLI::PositiveNumber);
  generate->add_option("--stride", generate_args.stride, "Step between queried frames")->check(CLI::PositiveNumber);
  generate->add_option("--templates", generate_args.templates, "Restrict to these template ids")->delimiter(',');
  generate->add_flag("--no-cot", generate_args.no_cot, "Omit reasoning traces");
  generate->add_option("--diagnostics", generate_args.diagnostics,
                       "Diagnostics report path (default: <out>.diagnostics.json)");
  add_common(generate, common, true, true, true, false, true);

  auto* stats = app.add_subcommand("stats", "Corpus statistics over queried frame graphs");
  stats->add_option("inputs", stats_args.inputs, "Scene graph files or directories");
  stats->add_option("--window", stats_args.window, "Temporal window length w")->check(CLI::PositiveNumber);
  stats->add_option("--stride", stats_args.stride, "Step between queried frames")->check(CLI::PositiveNumber);
  add_common(stats, common, false, true, true, true, true);

  auto* split = app.add_subcommand("split", "Select the validation subset of a sample file");
  split->add_option("input", split_args.input, "Sample JSONL file")->required()->check(CLI::ExistingFile);
  add_common(split, common, true, true, false, false, false);

  auto* report = app.add_subcommand("report", "Per-template question-type table of a sample file");
  report->add_option("input", report_args.input, "Sample JSONL file")->required()->check(CLI::ExistingFile);
  add_common(report, common, false, true, false, true, false);

  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve->add_option("--host", serve_args.host, "Bind address");
  serve->add_option("--port", serve_args.port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535));
  serve->add_option("--images", serve_args.images, "Directory served under /images")->check(CLI::ExistingDirectory);
  serve->add_option("--snapshot-interval", serve_args.snapshot_interval, "Edits between snapshots (0 disables)");
  serve->add_flag("--no-fsync", serve_args.no_fsync, "Skip fsync after each edit");
  add_common(serve, common, false, false, true, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: kind=usage message=" << quote(e.what()) << "\n";
    return kUsage;
  }

  Catalogs cats(common);
  try {
    if (*ingest) return run_ingest(ingest_args, common, cats);
    if (*validate) return run_validate(validate_args, common, cats);
    if (*generate) return run_generate(generate_args, common, cats);
    if (*stats) return run_stats(stats_args, common, cats);
    if (*split) return run_split(split_args, common);
    if (*report) return run_report(report_args, common);
    if (*serve) return run_serve(serve_args, common, cats);
  } catch (const crs::Error& e) {
    std::cerr << "error: kind=" << e.kind() << " message=" << quote(e.what()) << "\n";
    return e.kind() == "internal" ? kInternal : kData;
  } catch (const json::exception& e) {
    std::cerr << "error: kind=parse message=" << quote(e.what()) << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: kind=io message=" << quote(e.what()) << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=" << quote(e.what()) << "\n";
    return kInternal;
  }
  return kUsage;
}
