#include "crs/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "crs/canonical.hpp"
#include "crs/error.hpp"
#include "crs/graph_io.hpp"
#include "crs/uniqueness.hpp"

namespace crs {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::string& str_field(const json& cmd, const char* key) {
  if (!cmd.contains(key) || !cmd[key].is_string()) {
    throw InvalidCommandError(std::string("command needs string field '") + key + "'");
  }
  return cmd[key].get_ref<const std::string&>();
}

Frame frame_field(const json& cmd, const char* key, const SceneGraph& g) {
  if (!cmd.contains(key) || !cmd[key].is_number_integer()) {
    throw InvalidCommandError(std::string("command needs integer field '") + key + "'");
  }
  Frame t = cmd[key].get<int>();
  if (!g.frame_range.contains(t)) throw RangeError("frame " + std::to_string(t) + " outside the scene's frame range");
  return t;
}

bool bool_field(const json& cmd, const char* key, bool fallback) {
  if (!cmd.contains(key)) return fallback;
  if (!cmd[key].is_boolean()) throw InvalidCommandError(std::string("field '") + key + "' must be a boolean");
  return cmd[key].get<bool>();
}

std::pair<Frame, Frame> frame_span(const json& cmd, const SceneGraph& g) {
  if (!cmd.contains("frames") || !cmd["frames"].is_array() || cmd["frames"].size() != 2) {
    throw InvalidCommandError("command needs 'frames': [first, last]");
  }
  Frame a = cmd["frames"][0].get<int>();
  Frame b = cmd["frames"][1].get<int>();
  if (a > b || !g.frame_range.contains(a) || !g.frame_range.contains(b)) {
    throw RangeError("invalid frame scope [" + std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  return {a, b};
}

Node& node_field(SceneGraph& g, const json& cmd, const char* key = "node") {
  const auto& id = str_field(cmd, key);
  auto* n = g.find_node(id);
  if (!n) throw NotFoundError("unknown node '" + id + "'");
  return *n;
}

Edge& edge_field(SceneGraph& g, const json& cmd) {
  const auto& id = str_field(cmd, "edge");
  auto* e = g.find_edge(id);
  if (!e) throw NotFoundError("unknown edge '" + id + "'");
  return *e;
}

CameraMarker marker_field(const json& cmd, const SceneGraph& g) {
  json m;
  m["camera"] = str_field(cmd, "camera");
  if (cmd.contains("point")) m["point"] = cmd["point"];
  if (cmd.contains("box")) m["box"] = cmd["box"];
  CameraMarker marker;
  try {
    marker = marker_from_json(m);
  } catch (const Error& e) {
    throw InvalidCommandError(e.what());
  } catch (const json::exception& e) {
    throw InvalidCommandError(e.what());
  }
  if (!marker.within(g.image_dims)) throw RangeError("marker lies outside the image");
  return marker;
}

/// Expands a static value into one entry per frame of the scene.
std::map<Frame, std::string> spread(const PropertyValue& v, const SceneGraph& g) {
  if (!v.is_static()) return v.temporal_values();
  std::map<Frame, std::string> out;
  for (Frame f = g.frame_range.first; f <= g.frame_range.last; ++f) out[f] = v.static_value();
  return out;
}

/// Copies the value at the edge of the span across the rest of it.
void propagate(PropertyValue& v, const std::string& direction, Frame a, Frame b, const SceneGraph& g) {
  if (v.is_static()) return;
  if (direction != "forward" && direction != "backward") {
    throw InvalidCommandError("direction must be 'forward' or 'backward'");
  }
  Frame from = direction == "forward" ? a : b;
  auto source = v.at(from);
  if (!source) throw InvalidCommandError("no value at frame " + std::to_string(from) + " to propagate");
  auto values = spread(v, g);
  for (Frame f = a; f <= b; ++f) values[f] = *source;
  v = PropertyValue::temporal(std::move(values));
}

std::string fresh_edge_id(const SceneGraph& g) {
  for (std::size_t k = g.edges.size() + 1;; ++k) {
    std::string id = "E-" + std::to_string(k);
    if (!g.find_edge(id)) return id;
  }
}

std::string fresh_node_id(const SceneGraph& g, const std::string& type) {
  std::string prefix;
  bool up = true;
  for (char c : type) {
    if (c == '_' || c == ' ') {
      up = true;
      continue;
    }
    prefix += up ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
    up = false;
  }
  for (int k = 1;; ++k) {
    std::string id = prefix + "-" + std::to_string(k);
    if (!g.find_node(id)) return id;
  }
}

void warn_node(const Node& n, std::vector<std::string>& warnings) {
  for (const auto& rule : check_node_type(n.type, CanonicalRules::defaults())) {
    warnings.push_back("phi_n " + rule + ": There exists a " + n.type);
  }
}

void warn_property(const Node& n, const std::string& key, std::vector<std::string>& warnings) {
  auto it = n.properties.find(key);
  if (it == n.properties.end()) return;
  std::set<std::string> seen;
  for (const auto& v : it->second.all_values()) {
    for (const auto& rule : check_property(key, v, CanonicalRules::defaults())) {
      if (seen.insert(rule).second) {
        warnings.push_back("phi_p " + rule + ": The " + key + " of " + n.type + " is '" + v + "'");
      }
    }
  }
}

void require_label(const std::string& label, const SceneGraph& g, const NodeId& s, const NodeId& t) {
  auto hits = check_edge_label(label, CanonicalRules::defaults());
  if (hits.empty()) return;
  const auto* a = g.find_node(s);
  const auto* b = g.find_node(t);
  std::string msg = "edge label rejected (" + hits.front() + "): The " + (a ? a->type : s) + " " + label + " the " +
                    (b ? b->type : t);
  throw CanonicalError(msg);
}

// Keeps completeness flags valid for types that have no node (yet).
void declare_type(SceneGraph& g, const std::string& type) {
  auto& d = g.declared_types;
  bool flagged = std::any_of(g.completeness.begin(), g.completeness.end(),
                             [&](const auto& kv) { return kv.first.second == type; });
  if (flagged && std::find(d.begin(), d.end(), type) == d.end()) d.push_back(type);
}

void anchor_feedback(const AnchorCheck& check, CommandResult& r) {
  r.anchor_check = anchor_check_to_json(check);
  if (!check.unique()) {
    std::string ids;
    for (const auto& id : check.collides_with()) ids += (ids.empty() ? "" : ", ") + id;
    r.warnings.push_back("collides-with: [" + ids + "]");
  }
}

}  // namespace

const std::vector<std::string>& command_kinds() {
  static const std::vector<std::string> kinds = {
      "transfer_node",      "create_manual_node",  "set_property",         "propagate_property",
      "delete_property_at_frame", "add_edge",      "delete_edge",          "propagate_edge_label",
      "set_marker",         "delete_marker",       "set_visibility",       "set_unique_node",
      "set_unique_property", "set_unique_edge",    "set_completeness",     "delete_node",
      "accept_proposal"};
  return kinds;
}

CommandResult apply_command(SceneGraph& g, const json& cmd, const Catalog& catalog, const Scaffold* scaffold) {
  if (!cmd.is_object()) throw InvalidCommandError("command must be a JSON object");
  const auto& kind = str_field(cmd, "kind");
  CommandResult r;
  std::vector<std::string> nodes, edges, removed_nodes, removed_edges;

  try {
    if (kind == "transfer_node") {
      if (!scaffold) throw InvalidCommandError("scene has no scaffold");
      const auto& sid = str_field(cmd, "source_id");
      const auto* element = scaffold->find(sid);
      if (!element) throw NotFoundError("unknown scaffold element '" + sid + "'");
      const auto& n = transfer_node(*element, g, catalog);
      nodes.push_back(n.id);
      warn_node(n, r.warnings);
    } else if (kind == "create_manual_node") {
      Node n;
      n.type = str_field(cmd, "type");
      n.id = cmd.contains("id") ? str_field(cmd, "id") : fresh_node_id(g, n.type);
      if (g.find_node(n.id)) throw ConflictError("node '" + n.id + "' already exists");
      Frame t = frame_field(cmd, "frame", g);
      n.markers[t].push_back(marker_field(cmd, g));
      if (cmd.contains("properties")) {
        for (const auto& [k, v] : cmd["properties"].items()) n.properties[k] = value_from_json(v, "properties." + k);
      }
      if (n.type == catalog.type("ego")) n.is_unique = true;
      g.nodes.push_back(n);
      nodes.push_back(n.id);
      warn_node(n, r.warnings);
      for (const auto& [k, v] : n.properties) warn_property(n, k, r.warnings);
    } else if (kind == "set_property") {
      auto& n = node_field(g, cmd);
      const auto& key = str_field(cmd, "key");
      const auto& value = str_field(cmd, "value");
      if (key.empty()) throw InvalidCommandError("property key is empty");
      if (bool_field(cmd, "locked", true)) {
        n.properties[key] = PropertyValue::fixed(value);
      } else {
        std::map<Frame, std::string> values;
        if (auto it = n.properties.find(key); it != n.properties.end()) values = spread(it->second, g);
        if (cmd.contains("frames")) {
          auto [a, b] = frame_span(cmd, g);
          for (Frame f = a; f <= b; ++f) values[f] = value;
        } else {
          values[frame_field(cmd, "frame", g)] = value;
        }
        n.properties[key] = PropertyValue::temporal(std::move(values));
      }
      nodes.push_back(n.id);
      warn_property(n, key, r.warnings);
    } else if (kind == "propagate_property") {
      auto& n = node_field(g, cmd);
      const auto& key = str_field(cmd, "key");
      auto it = n.properties.find(key);
      if (it == n.properties.end()) throw NotFoundError("node '" + n.id + "' has no property '" + key + "'");
      auto [a, b] = frame_span(cmd, g);
      if (it->second.is_static()) r.warnings.push_back("property '" + key + "' is locked; nothing to propagate");
      propagate(it->second, str_field(cmd, "direction"), a, b, g);
      nodes.push_back(n.id);
    } else if (kind == "delete_property_at_frame") {
      auto& n = node_field(g, cmd);
      const auto& key = str_field(cmd, "key");
      Frame t = frame_field(cmd, "frame", g);
      auto it = n.properties.find(key);
      if (it == n.properties.end()) throw NotFoundError("node '" + n.id + "' has no property '" + key + "'");
      auto values = spread(it->second, g);
      values.erase(t);
      if (values.empty()) {
        n.properties.erase(it);
        auto& keys = n.unique_property_keys;
        keys.erase(std::remove(keys.begin(), keys.end(), key), keys.end());
      } else {
        it->second = PropertyValue::temporal(std::move(values));
      }
      nodes.push_back(n.id);
    } else if (kind == "add_edge") {
      Edge e;
      e.source = str_field(cmd, "source");
      e.target = str_field(cmd, "target");
      if (!g.find_node(e.source)) throw NotFoundError("unknown node '" + e.source + "'");
      if (!g.find_node(e.target)) throw NotFoundError("unknown node '" + e.target + "'");
      const auto& label = str_field(cmd, "label");
      require_label(label, g, e.source, e.target);
      if (bool_field(cmd, "temporal", false)) {
        std::map<Frame, std::string> values;
        if (cmd.contains("frames")) {
          auto [a, b] = frame_span(cmd, g);
          for (Frame f = a; f <= b; ++f) values[f] = label;
        } else {
          values[frame_field(cmd, "frame", g)] = label;
        }
        e.label = PropertyValue::temporal(std::move(values));
      } else {
        e.label = PropertyValue::fixed(label);
      }
      e.id = cmd.contains("id") ? str_field(cmd, "id") : fresh_edge_id(g);
      if (g.find_edge(e.id)) throw ConflictError("edge '" + e.id + "' already exists");
      e.is_unique = bool_field(cmd, "unique", false);
      edges.push_back(e.id);
      g.edges.push_back(std::move(e));
    } else if (kind == "delete_edge") {
      auto& e = edge_field(g, cmd);
      std::string id = e.id;
      if (cmd.contains("frame")) {
        Frame t = frame_field(cmd, "frame", g);
        auto values = spread(e.label, g);
        values.erase(t);
        if (values.empty()) {
          removed_edges.push_back(id);
        } else {
          e.label = PropertyValue::temporal(std::move(values));
          edges.push_back(id);
        }
      } else {
        removed_edges.push_back(id);
      }
      if (!removed_edges.empty()) {
        g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(), [&](const Edge& x) { return x.id == id; }),
                      g.edges.end());
      }
    } else if (kind == "propagate_edge_label") {
      auto& e = edge_field(g, cmd);
      auto [a, b] = frame_span(cmd, g);
      if (e.label.is_static()) r.warnings.push_back("edge label is static; nothing to propagate");
      propagate(e.label, str_field(cmd, "direction"), a, b, g);
      edges.push_back(e.id);
    } else if (kind == "set_marker") {
      auto& n = node_field(g, cmd);
      Frame t = frame_field(cmd, "frame", g);
      auto marker = marker_field(cmd, g);
      auto& list = n.markers[t];
      list.erase(std::remove_if(list.begin(), list.end(),
                                [&](const CameraMarker& m) { return m.camera == marker.camera; }),
                 list.end());
      list.push_back(marker);
      std::stable_sort(list.begin(), list.end(), [](const CameraMarker& a, const CameraMarker& b) {
        return static_cast<int>(a.camera) < static_cast<int>(b.camera);
      });
      nodes.push_back(n.id);
    } else if (kind == "delete_marker") {
      auto& n = node_field(g, cmd);
      Frame t = frame_field(cmd, "frame", g);
      auto it = n.markers.find(t);
      if (it == n.markers.end()) throw NotFoundError("node '" + n.id + "' has no marker at frame " + std::to_string(t));
      if (cmd.contains("camera")) {
        auto cam = parse_camera(str_field(cmd, "camera"));
        if (!cam) throw InvalidCommandError("unknown camera");
        auto& list = it->second;
        list.erase(std::remove_if(list.begin(), list.end(), [&](const CameraMarker& m) { return m.camera == *cam; }),
                   list.end());
        if (list.empty()) n.markers.erase(it);
      } else {
        n.markers.erase(it);
      }
      nodes.push_back(n.id);
    } else if (kind == "set_visibility") {
      auto& n = node_field(g, cmd);
      auto [a, b] = frame_span(cmd, g);
      bool visible = bool_field(cmd, "visible", true);
      for (Frame f = a; f <= b; ++f) {
        if (visible) {
          n.visible_frames.insert(f);
        } else {
          n.visible_frames.erase(f);
        }
      }
      nodes.push_back(n.id);
    } else if (kind == "set_unique_node") {
      auto& n = node_field(g, cmd);
      n.is_unique = bool_field(cmd, "unique", true) || n.type == catalog.type("ego");
      nodes.push_back(n.id);
      if (n.is_unique) anchor_feedback(check_node_anchor(g, n.id), r);
    } else if (kind == "set_unique_property") {
      auto& n = node_field(g, cmd);
      const auto& key = str_field(cmd, "key");
      if (!n.properties.count(key)) throw NotFoundError("node '" + n.id + "' has no property '" + key + "'");
      auto& keys = n.unique_property_keys;
      keys.erase(std::remove(keys.begin(), keys.end(), key), keys.end());
      bool unique = bool_field(cmd, "unique", true);
      if (unique) keys.push_back(key);
      nodes.push_back(n.id);
      if (unique) anchor_feedback(check_property_anchor(g, n.id, key), r);
    } else if (kind == "set_unique_edge") {
      auto& e = edge_field(g, cmd);
      e.is_unique = bool_field(cmd, "unique", true);
      edges.push_back(e.id);
      if (e.is_unique) anchor_feedback(check_edge_anchor(g, e.id), r);
    } else if (kind == "set_completeness") {
      Frame t = frame_field(cmd, "frame", g);
      const auto& type = str_field(cmd, "type");
      g.completeness[{t, type}] = bool_field(cmd, "complete", true);
      declare_type(g, type);
    } else if (kind == "delete_node") {
      std::string id = node_field(g, cmd).id;
      declare_type(g, g.find_node(id)->type);
      for (const auto& e : g.edges) {
        if (e.source == id || e.target == id) removed_edges.push_back(e.id);
      }
      g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(),
                                   [&](const Edge& e) { return e.source == id || e.target == id; }),
                    g.edges.end());
      g.nodes.erase(std::remove_if(g.nodes.begin(), g.nodes.end(), [&](const Node& n) { return n.id == id; }),
                    g.nodes.end());
      removed_nodes.push_back(id);
    } else if (kind == "accept_proposal") {
      if (!scaffold) throw InvalidCommandError("scene has no scaffold");
      const auto& pid = str_field(cmd, "proposal");
      auto set = auto_edges(g, *scaffold, catalog);
      auto it = std::find_if(set.proposals.begin(), set.proposals.end(),
                             [&](const EdgeProposal& p) { return p.id == pid; });
      if (it == set.proposals.end()) throw NotFoundError("unknown or already accepted proposal '" + pid + "'");
      edges.push_back(accept_proposal(g, *it));
    } else {
      throw InvalidCommandError("unknown command kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidCommandError(std::string("malformed command: ") + e.what());
  }

  try {
    g.check();
  } catch (const SchemaError& e) {
    throw InvalidCommandError(std::string("command would break the graph: ") + e.what());
  }

  r.delta["kind"] = kind;
  r.delta["nodes"] = nodes;
  r.delta["edges"] = edges;
  r.delta["removed_nodes"] = removed_nodes;
  r.delta["removed_edges"] = removed_edges;
  return r;
}

// ---------------------------------------------------------------------------
// Persistence

LogContents read_edit_log(const std::filesystem::path& path) {
  LogContents out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    bool last = nl == std::string::npos;
    std::string line = text.substr(pos, last ? std::string::npos : nl - pos);
    try {
      if (last) throw std::runtime_error("unterminated");
      out.entries.push_back(json::parse(line));
    } catch (const std::exception&) {
      // Only the tail may be torn: a write cut short by a crash.
      bool tail = last || text.find_first_not_of('\n', nl + 1) == std::string::npos;
      if (!tail) throw SchemaError(path.string() + ": corrupt entry in the middle of the edit log");
      out.torn_tail = true;
      return out;
    }
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

namespace {

void check_scene_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." ||
      !std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; })) {
    throw InvalidCommandError("invalid scene id '" + id + "'");
  }
}

void fsync_path(const std::filesystem::path& p) {
  int fd = ::open(p.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

void durable_write(const std::filesystem::path& path, const std::string& text, bool sync) {
  write_text_file(path, text);
  if (sync) {
    fsync_path(path);
    fsync_path(path.parent_path());
  }
}

}  // namespace

AnnotationStore::AnnotationStore(std::filesystem::path data_dir, const Catalog& catalog, StoreOptions options)
    : data_dir_(std::move(data_dir)), catalog_(catalog), options_(options) {
  std::filesystem::create_directories(data_dir_ / "scenes");
}

std::filesystem::path AnnotationStore::scene_dir(const std::string& id) const {
  check_scene_id(id);
  return data_dir_ / "scenes" / id;
}

std::vector<std::string> AnnotationStore::list_scenes() const {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(data_dir_ / "scenes")) {
    if (e.is_directory() && std::filesystem::exists(e.path() / "base.json")) out.push_back(e.path().filename());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool AnnotationStore::has_scene(const std::string& id) const {
  return std::filesystem::exists(scene_dir(id) / "base.json");
}

void AnnotationStore::create_scene(const SceneGraph& graph, const Scaffold* scaffold) {
  std::lock_guard lock(map_mu_);
  auto dir = scene_dir(graph.scene_id);
  if (std::filesystem::exists(dir / "base.json")) throw ConflictError("scene '" + graph.scene_id + "' already exists");
  graph.check();
  std::filesystem::create_directories(dir);
  if (scaffold) durable_write(dir / "scaffold.json", scaffold_to_json(*scaffold).dump(2) + "\n", options_.fsync);
  durable_write(dir / "base.json", serialize_graph(graph), options_.fsync);
}

AnnotationStore::Scene& AnnotationStore::scene(const std::string& id) {
  std::lock_guard lock(map_mu_);
  auto it = scenes_.find(id);
  if (it != scenes_.end()) return *it->second;
  auto dir = scene_dir(id);
  if (!std::filesystem::exists(dir / "base.json")) throw NotFoundError("unknown scene '" + id + "'");
  auto s = std::make_unique<Scene>();
  s->dir = dir;
  load(*s);
  return *scenes_.emplace(id, std::move(s)).first->second;
}

void AnnotationStore::load(Scene& s) {
  if (std::filesystem::exists(s.dir / "scaffold.json")) s.scaffold = load_scaffold(s.dir / "scaffold.json");
  s.graph = load_graph(s.dir / "base.json");
  s.revision = 0;
  if (std::filesystem::exists(s.dir / "snapshot.json")) {
    auto doc = parse_json_file(s.dir / "snapshot.json");
    s.revision = doc.at("revision").get<int>();
    s.graph = graph_from_json(doc.at("graph"));
  }
  auto log_path = s.dir / "edits.jsonl";
  auto log = read_edit_log(log_path);
  if (log.torn_tail) std::filesystem::resize_file(log_path, log.valid_bytes);
  const Scaffold* scaffold = s.scaffold ? &*s.scaffold : nullptr;
  for (const auto& entry : log.entries) {
    int rev = entry.at("revision").get<int>();
    if (rev <= s.revision) continue;
    if (rev != s.revision + 1) throw SchemaError(log_path.string() + ": revision gap before " + std::to_string(rev));
    apply_command(s.graph, entry.at("command"), catalog_, scaffold);
    s.revision = rev;
  }
}

void AnnotationStore::append_log(Scene& s, int revision, const json& command) {
  ordered_json entry;
  entry["revision"] = revision;
  entry["command"] = command;
  std::string line = entry.dump() + "\n";
  auto path = s.dir / "edits.jsonl";
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error("io", "cannot open edit log: " + std::string(std::strerror(errno)));
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    auto n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error("io", "cannot append to edit log: " + std::string(std::strerror(errno)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (options_.fsync) ::fsync(fd);
  ::close(fd);
}

void AnnotationStore::write_snapshot(Scene& s) {
  ordered_json doc;
  doc["revision"] = s.revision;
  doc["graph"] = graph_to_json(s.graph);
  durable_write(s.dir / "snapshot.json", doc.dump(2) + "\n", options_.fsync);
  s.since_snapshot = 0;
}

int AnnotationStore::revision(const std::string& id) {
  auto& s = scene(id);
  std::lock_guard lock(s.mu);
  return s.revision;
}

SceneGraph AnnotationStore::graph(const std::string& id) {
  auto& s = scene(id);
  std::lock_guard lock(s.mu);
  return s.graph;
}

std::optional<Scaffold> AnnotationStore::scaffold(const std::string& id) {
  auto& s = scene(id);
  std::lock_guard lock(s.mu);
  return s.scaffold;
}

SceneGraph AnnotationStore::graph_at(const std::string& id, int revision) {
  auto& s = scene(id);
  std::lock_guard lock(s.mu);
  if (revision < 0 || revision > s.revision) {
    throw RangeError("revision " + std::to_string(revision) + " outside [0, " + std::to_string(s.revision) + "]");
  }
  auto g = load_graph(s.dir / "base.json");
  const Scaffold* scaffold = s.scaffold ? &*s.scaffold : nullptr;
  for (const auto& entry : read_edit_log(s.dir / "edits.jsonl").entries) {
    if (entry.at("revision").get<int>() > revision) break;
    apply_command(g, entry.at("command"), catalog_, scaffold);
  }
  return g;
}

ProposalSet AnnotationStore::proposals(const std::string& id) {
  auto& s = scene(id);
  std::lock_guard lock(s.mu);
  if (!s.scaffold) return {};
  return auto_edges(s.graph, *s.scaffold, catalog_);
}

std::string AnnotationStore::export_graph(const std::string& id) { return serialize_graph(graph(id)); }

ApplyResult AnnotationStore::apply(const std::string& id, const json& command) {
  auto& s = scene(id);
  std::lock_guard lock(s.mu);
  if (!command.is_object() || !command.contains("revision") || !command["revision"].is_number_integer()) {
    throw InvalidCommandError("command needs integer field 'revision'");
  }
  int client = command["revision"].get<int>();
  if (client != s.revision) {
    throw ConflictError("stale revision " + std::to_string(client) + ", scene is at " + std::to_string(s.revision));
  }
  json stored = command;
  stored.erase("revision");

  SceneGraph next = s.graph;
  const Scaffold* scaffold = s.scaffold ? &*s.scaffold : nullptr;
  auto result = apply_command(next, stored, catalog_, scaffold);
  append_log(s, s.revision + 1, stored);
  s.graph = std::move(next);
  ++s.revision;
  if (++s.since_snapshot >= options_.snapshot_interval && options_.snapshot_interval > 0) write_snapshot(s);
  return {s.revision, std::move(result)};
}

}  // namespace crs
