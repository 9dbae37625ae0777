#pragma once

// File-backed scene store for human enrichment. Each scene lives in
// <data_dir>/scenes/<id>/ as base.json (revision 0), an optional snapshot,
// an append-only edits.jsonl and an optional scaffold.json.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/catalog.hpp"
#include "crs/error.hpp"
#include "crs/graph.hpp"
#include "crs/scaffold.hpp"

namespace crs {

/// Raised for edge labels rejected by the canonical edge operator.
class CanonicalError : public Error {
 public:
  explicit CanonicalError(const std::string& message) : Error("canonical", message) {}
};

struct CommandResult {
  nlohmann::ordered_json delta;
  std::vector<std::string> warnings;
  nlohmann::ordered_json anchor_check;  // null unless a uniqueness command ran
};

/// Applies one edit command to `graph` in place. Shared by live edits and
/// log replay. Throws InvalidCommandError, NotFoundError, RangeError,
/// ConflictError or CanonicalError; the graph is unchanged on error only
/// when the caller passes a copy.
CommandResult apply_command(SceneGraph& graph, const nlohmann::json& command, const Catalog& catalog,
                            const Scaffold* scaffold);

/// Names of every command kind accepted by apply_command.
const std::vector<std::string>& command_kinds();

struct StoreOptions {
  std::size_t snapshot_interval = 50;
  bool fsync = true;
};

struct ApplyResult {
  int revision = 0;
  CommandResult result;
};

class AnnotationStore {
 public:
  AnnotationStore(std::filesystem::path data_dir, const Catalog& catalog, StoreOptions options = {});

  std::vector<std::string> list_scenes() const;
  bool has_scene(const std::string& id) const;
  /// Registers a new scene at revision 0. Throws ConflictError if it exists.
  void create_scene(const SceneGraph& graph, const Scaffold* scaffold = nullptr);

  int revision(const std::string& id);
  SceneGraph graph(const std::string& id);
  /// Replays the log from revision 0 up to `revision` (read-only history).
  SceneGraph graph_at(const std::string& id, int revision);
  std::optional<Scaffold> scaffold(const std::string& id);
  ProposalSet proposals(const std::string& id);
  std::string export_graph(const std::string& id);

  /// Commands must carry "revision" equal to the scene's current revision.
  ApplyResult apply(const std::string& id, const nlohmann::json& command);

  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct Scene {
    std::mutex mu;
    std::filesystem::path dir;
    SceneGraph graph;
    int revision = 0;
    std::optional<Scaffold> scaffold;
    std::size_t since_snapshot = 0;
  };

  Scene& scene(const std::string& id);
  void load(Scene& s);
  void append_log(Scene& s, int revision, const nlohmann::json& command);
  void write_snapshot(Scene& s);
  std::filesystem::path scene_dir(const std::string& id) const;

  std::filesystem::path data_dir_;
  const Catalog& catalog_;
  StoreOptions options_;
  mutable std::mutex map_mu_;
  std::map<std::string, std::unique_ptr<Scene>> scenes_;
};

/// Parses edits.jsonl, dropping a torn trailing line. Returns the valid
/// entries and the byte length of the valid prefix.
struct LogContents {
  std::vector<nlohmann::json> entries;
  std::size_t valid_bytes = 0;
  bool torn_tail = false;
};
LogContents read_edit_log(const std::filesystem::path& path);

}  // namespace crs
