#include "oracles.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "crs/graph_io.hpp"

#ifndef CRS_FIXTURE_DIR
#error "CRS_FIXTURE_DIR must be defined"
#endif

namespace oracle {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path fixture(const std::string& rel) { return fs::path(CRS_FIXTURE_DIR) / rel; }

std::vector<fs::path> fixture_scene_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(fixture("scenes"))) {
    if (e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

crs::SceneGraph load_fixture(const std::string& rel) { return crs::load_graph(fixture(rel)); }

std::vector<crs::SceneGraph> fixture_scenes() {
  std::vector<crs::SceneGraph> out;
  for (const auto& p : fixture_scene_files()) out.push_back(crs::load_graph(p));
  return out;
}

std::vector<crs::SceneGraph> all_clean_fixtures() {
  auto out = fixture_scenes();
  for (const char* f : {"bus_lane.json", "cyclic.json", "five_frames.json"}) out.push_back(load_fixture(f));
  return out;
}

namespace {

const crs::Node* node_of(const crs::SceneGraph& g, const std::string& id) {
  for (const auto& n : g.nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

bool shown(const crs::Node& n, crs::Frame t) {
  if (n.visible_frames.count(t)) return true;
  auto it = n.markers.find(t);
  return it != n.markers.end() && !it->second.empty();
}

std::optional<std::string> value_at(const crs::PropertyValue& v, crs::Frame t) {
  if (v.is_static()) return v.static_value();
  auto it = v.temporal_values().find(t);
  if (it == v.temporal_values().end()) return std::nullopt;
  return it->second;
}

struct Walker {
  const crs::SceneGraph& g;
  crs::Frame t;
  std::map<std::string, std::vector<std::string>> unique_out;

  Walker(const crs::SceneGraph& graph, crs::Frame frame) : g(graph), t(frame) {
    for (const auto& e : g.edges) {
      if (!e.is_unique) continue;
      const auto* s = node_of(g, e.source);
      const auto* d = node_of(g, e.target);
      if (!s || !d || !shown(*s, t) || !shown(*d, t)) continue;
      if (!value_at(e.label, t)) continue;
      unique_out[e.source].push_back(e.target);
    }
  }

  std::vector<std::string> own_kinds(const std::string& id) const {
    const auto& n = *node_of(g, id);
    std::vector<std::string> kinds;
    if (n.is_unique) kinds.push_back("node_type");
    for (const auto& key : n.unique_property_keys) {
      auto it = n.properties.find(key);
      if (it != n.properties.end() && value_at(it->second, t)) kinds.push_back("property");
    }
    auto m = n.markers.find(t);
    if (m != n.markers.end() && !m->second.empty()) kinds.push_back("point_marker");
    return kinds;
  }

  void walk(std::vector<std::string>& path, int budget, std::multiset<CandidateKey>& out) const {
    const std::string& last = path.back();
    const int k = static_cast<int>(path.size()) - 1;
    auto own = own_kinds(last);
    bool extended = false;
    if (k < budget) {
      auto it = unique_out.find(last);
      if (it != unique_out.end()) {
        for (const auto& next : it->second) {
          if (std::find(path.begin(), path.end(), next) != path.end()) continue;
          extended = true;
          path.push_back(next);
          walk(path, budget, out);
          path.pop_back();
        }
      }
    }
    const std::string& target = path.front();
    for (const auto& kind : own) out.insert({target, k == 0 ? kind : "relation", k});
    if (own.empty() && !extended) out.insert({target, k == 0 ? "non_unique" : "relation", k});
  }
};

}  // namespace

std::multiset<CandidateKey> enumerate_candidates(const crs::SceneGraph& g, crs::Frame t, const std::string& node,
                                                 int hops) {
  Walker w(g, t);
  std::multiset<CandidateKey> out;
  std::vector<std::string> path{node};
  w.walk(path, hops, out);
  return out;
}

std::set<std::string> resolve(const crs::SceneGraph& g, crs::Frame t, const json& d,
                              const std::string& description_key) {
  const auto& anchor = d.at("anchor");
  const std::string kind = anchor.at("kind");
  const auto* anchor_node = node_of(g, anchor.at("node"));
  if (!anchor_node) return {};

  std::set<std::string> current;
  for (const auto& n : g.nodes) {
    if (!shown(n, t)) continue;
    if (kind == "node_type") {
      if (n.type == anchor_node->type) current.insert(n.id);
    } else if (kind == "property") {
      const std::string key = anchor.at("key");
      if (key != description_key && n.type != anchor_node->type) continue;
      auto it = n.properties.find(key);
      if (it == n.properties.end()) continue;
      auto v = value_at(it->second, t);
      if (v && *v == anchor.at("value").get<std::string>()) current.insert(n.id);
    } else {
      // non-unique reference: every node of that type
      if (n.type == anchor_node->type) current.insert(n.id);
    }
  }

  std::vector<json> deps(d.at("deps").begin(), d.at("deps").end());
  std::stable_sort(deps.begin(), deps.end(),
                   [](const json& a, const json& b) { return a.at("hop_depth").get<int>() < b.at("hop_depth").get<int>(); });
  for (const auto& dep : deps) {
    const auto* down = node_of(g, dep.at("downstream"));
    if (!down) return {};
    const std::string label = dep.at("relation");
    std::set<std::string> next;
    for (const auto& e : g.edges) {
      if (!current.count(e.target)) continue;
      const auto* s = node_of(g, e.source);
      if (!s || !shown(*s, t) || s->type != down->type) continue;
      auto l = value_at(e.label, t);
      if (l && *l == label) next.insert(e.source);
    }
    current = std::move(next);
  }
  return current;
}

const std::map<std::string, std::pair<std::string, std::string>>& taxonomy() {
  static const std::map<std::string, std::pair<std::string, std::string>> table = {
      {"counting_at_intersection_per_direction", {"Counting", "perception_like"}},
      {"counting_crossing", {"Counting", "perception_like"}},
      {"counting_per_direction", {"Counting", "perception_like"}},
      {"counting_generic", {"Counting", "perception_like"}},
      {"lane_direction", {"Properties", "perception_like"}},
      {"lane_type", {"Properties", "perception_like"}},
      {"line_color", {"Properties", "perception_like"}},
      {"traffic_light_status", {"Properties", "perception_like"}},
      {"line_marking", {"Properties", "perception_like"}},
      {"line_type", {"Properties", "perception_like"}},
      {"crossing_type", {"Properties", "perception_like"}},
      {"traffic_light_change", {"Properties", "perception_like"}},
      {"pairwise_lane_comparison_by_direction", {"Comparison", "perception_like"}},
      {"pairwise_vehicle_location", {"Comparison", "reasoning_heavy"}},
      {"pointing", {"Existence", "reasoning_heavy"}},
      {"existence_of_crossings", {"Existence", "reasoning_heavy"}},
      {"sign_controls_lane", {"Relational", "reasoning_heavy"}},
      {"traffic_light_controls_lane", {"Relational", "reasoning_heavy"}},
      {"vehicle_position", {"Relational", "reasoning_heavy"}},
  };
  return table;
}

const std::map<std::string, int>& traversal_counts() {
  // lane -> intersection; line -> lane marking; each actor -> its lane;
  // intersection -> crossing; sign/light/actor -> lane.
  static const std::map<std::string, int> table = {
      {"counting_at_intersection_per_direction", 1},
      {"counting_crossing", 0},
      {"counting_per_direction", 0},
      {"counting_generic", 0},
      {"lane_direction", 0},
      {"lane_type", 0},
      {"line_color", 1},
      {"traffic_light_status", 0},
      {"line_marking", 1},
      {"line_type", 1},
      {"crossing_type", 0},
      {"traffic_light_change", 0},
      {"pairwise_lane_comparison_by_direction", 0},
      {"pairwise_vehicle_location", 2},
      {"pointing", 0},
      {"existence_of_crossings", 1},
      {"sign_controls_lane", 1},
      {"traffic_light_controls_lane", 1},
      {"vehicle_position", 1},
  };
  return table;
}

int recount_depth(const json& sample) {
  const auto& meta = sample.at("metadata");
  std::set<std::pair<std::string, std::string>> seen;
  int depth = 0;
  for (const auto& d : meta.at("descriptors")) {
    if (seen.insert({d.at("target").get<std::string>(), d.at("text").get<std::string>()}).second) {
      depth += static_cast<int>(d.at("deps").size());
    }
  }
  return depth + traversal_counts().at(meta.at("template_id").get<std::string>());
}

const std::map<std::string, std::vector<std::string>>& gating_requirements() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"counting_at_intersection_per_direction", {"lane"}},
      {"counting_crossing", {"crossing"}},
      {"counting_per_direction", {"lane"}},
      {"counting_generic", {"lane"}},
      {"existence_of_crossings", {"crossing"}},
  };
  return table;
}

int count_queried_frames(int first, int last, int window) {
  int n = 0;
  for (int t = first; t <= last; ++t) {
    if (t >= first + window - 1) ++n;
  }
  return n;
}

std::vector<json> parse_jsonl(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace oracle
