#include "crs/scaffold.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "crs/error.hpp"
#include "crs/graph_io.hpp"
#include "crs/rng.hpp"

namespace crs {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::vector<std::pair<ElementKind, const char*>> kCollections = {
    {ElementKind::LaneSegment, "lane_segments"},
    {ElementKind::LaneLine, "lane_lines"},
    {ElementKind::Intersection, "intersections"},
    {ElementKind::Split, "splits"},
    {ElementKind::Merge, "merges"},
    {ElementKind::PedestrianCrossing, "pedestrian_crossings"},
    {ElementKind::TrafficElement, "traffic_elements"},
    {ElementKind::Object, "objects"},
};

Frame parse_frame(const std::string& key, const std::string& where) {
  try {
    std::size_t used = 0;
    int f = std::stoi(key, &used);
    if (used == key.size()) return f;
  } catch (const std::exception&) {
  }
  throw SchemaError(where + ": frame key '" + key + "' is not an integer");
}

std::vector<std::string> id_list(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (j[key].is_string()) return {j[key].get<std::string>()};
  if (!j[key].is_array()) throw SchemaError(where + ": '" + key + "' must be a string or an array");
  return j[key].get<std::vector<std::string>>();
}

std::map<Frame, std::string> frame_links(const json& j, const char* key, const std::string& where) {
  std::map<Frame, std::string> out;
  if (!j.contains(key) || j[key].is_null()) return out;
  if (!j[key].is_object()) throw SchemaError(where + ": '" + key + "' must map frames to ids");
  for (const auto& [f, id] : j[key].items()) out[parse_frame(f, where)] = id.get<std::string>();
  return out;
}

std::string capitalized(const std::string& type) {
  std::string out;
  bool up = true;
  for (char c : type) {
    if (c == '_' || c == ' ') {
      up = true;
      continue;
    }
    out += up ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
    up = false;
  }
  return out;
}

}  // namespace

std::string_view element_collection(ElementKind kind) {
  for (const auto& [k, name] : kCollections) {
    if (k == kind) return name;
  }
  return "objects";
}

const ScaffoldElement* Scaffold::find(const std::string& source_id) const {
  for (const auto& e : elements) {
    if (e.source_id == source_id) return &e;
  }
  return nullptr;
}

std::map<std::string, std::size_t> Scaffold::counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [k, name] : kCollections) out[name] = 0;
  for (const auto& e : elements) ++out[std::string(element_collection(e.kind))];
  return out;
}

Scaffold scaffold_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("scaffold: document is not an object");
  Scaffold s;
  std::vector<std::string> problems;
  try {
    int version = doc.at("schema_version").get<int>();
    if (version != kScaffoldSchemaVersion) {
      throw SchemaError("scaffold: unsupported schema_version " + std::to_string(version));
    }
    s.scene_id = doc.at("scene_id").get<std::string>();
    auto range = doc.at("frame_range").get<std::vector<int>>();
    if (range.size() != 2 || range[0] > range[1]) throw SchemaError("scaffold: frame_range must be [first, last]");
    s.frame_range = {range[0], range[1]};
    if (doc.contains("image_dims")) {
      s.image_dims = {doc["image_dims"].at("width").get<int>(), doc["image_dims"].at("height").get<int>()};
    }
    if (doc.contains("images")) {
      for (const auto& [f, cams] : doc["images"].items()) {
        for (const auto& [cam, path] : cams.items()) {
          auto c = parse_camera(cam);
          if (!c) throw SchemaError("scaffold: unknown camera '" + cam + "'");
          s.images[parse_frame(f, "images")][*c] = path.get<std::string>();
        }
      }
    }
    if (doc.contains("ego_poses")) s.ego_poses = doc["ego_poses"];

    const auto& elements = doc.at("elements");
    for (const auto& [name, items] : elements.items()) {
      if (std::none_of(kCollections.begin(), kCollections.end(), [&](const auto& c) { return name == c.second; })) {
        problems.push_back("unknown element collection '" + name + "'");
      }
    }
    for (const auto& [kind, name] : kCollections) {
      if (!elements.contains(name)) continue;
      for (const auto& je : elements[name]) {
        ScaffoldElement e;
        e.kind = kind;
        e.source_id = je.at("source_id").get<std::string>();
        std::string where = std::string(name) + " '" + e.source_id + "'";
        if (kind == ElementKind::TrafficElement) {
          e.category = je.at("category").get<std::string>();
          if (e.category != "traffic_light" && e.category != "sign") {
            problems.push_back(where + ": category must be traffic_light or sign");
          }
        }
        if (kind == ElementKind::Object) e.category = je.at("class").get<std::string>();
        if (je.contains("visible_frames")) {
          for (int f : je["visible_frames"].get<std::vector<int>>()) e.visible_frames.insert(f);
        }
        if (je.contains("markers")) {
          for (const auto& [f, list] : je["markers"].items()) {
            Frame t = parse_frame(f, where);
            for (const auto& m : list) e.markers[t].push_back(marker_from_json(m));
          }
        }
        if (je.contains("properties")) {
          for (const auto& [k, v] : je["properties"].items()) e.properties[k] = value_from_json(v, where + "." + k);
        }
        if (je.contains("left_neighbor") && !je["left_neighbor"].is_null()) {
          e.left_neighbor = je["left_neighbor"].get<std::string>();
        }
        if (je.contains("right_neighbor") && !je["right_neighbor"].is_null()) {
          e.right_neighbor = je["right_neighbor"].get<std::string>();
        }
        e.left_of = id_list(je, "left_of", where);
        e.right_of = id_list(je, "right_of", where);
        e.controls = id_list(je, "controls", where);
        e.intersections = id_list(je, "intersections", where);
        e.in_lane = frame_links(je, "in_lane", where);
        e.in_intersection = frame_links(je, "in_intersection", where);
        s.elements.push_back(std::move(e));
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scaffold: ") + e.what());
  }

  // Cross-element checks.
  std::map<std::string, const ScaffoldElement*> by_id;
  for (const auto& e : s.elements) {
    if (!by_id.emplace(e.source_id, &e).second) problems.push_back("duplicate source_id '" + e.source_id + "'");
  }
  auto expect = [&](const ScaffoldElement& from, const std::string& id, ElementKind kind, const char* link) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      problems.push_back("dangling reference: '" + from.source_id + "' " + link + " -> missing '" + id + "'");
    } else if (it->second->kind != kind) {
      problems.push_back("bad reference: '" + from.source_id + "' " + link + " -> '" + id + "' is not a " +
                         std::string(element_collection(kind)) + " element");
    }
  };
  auto check_frame = [&](const ScaffoldElement& e, Frame f) {
    if (!s.frame_range.contains(f)) {
      problems.push_back("'" + e.source_id + "': frame " + std::to_string(f) + " outside frame_range");
    }
  };
  for (const auto& e : s.elements) {
    if (!e.left_neighbor.empty()) expect(e, e.left_neighbor, ElementKind::LaneSegment, "left_neighbor");
    if (!e.right_neighbor.empty()) expect(e, e.right_neighbor, ElementKind::LaneSegment, "right_neighbor");
    for (const auto& id : e.left_of) expect(e, id, ElementKind::LaneSegment, "left_of");
    for (const auto& id : e.right_of) expect(e, id, ElementKind::LaneSegment, "right_of");
    for (const auto& id : e.controls) expect(e, id, ElementKind::LaneSegment, "controls");
    for (const auto& id : e.intersections) expect(e, id, ElementKind::Intersection, "intersections");
    for (const auto& [f, id] : e.in_lane) {
      check_frame(e, f);
      expect(e, id, ElementKind::LaneSegment, "in_lane");
    }
    for (const auto& [f, id] : e.in_intersection) {
      check_frame(e, f);
      expect(e, id, ElementKind::Intersection, "in_intersection");
    }
    for (Frame f : e.visible_frames) check_frame(e, f);
    for (const auto& [f, m] : e.markers) check_frame(e, f);
    for (const auto& [k, v] : e.properties) {
      if (!v.is_static()) {
        for (const auto& [f, val] : v.temporal_values()) check_frame(e, f);
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid scaffold '" + s.scene_id + "':";
    for (const auto& p : problems) msg += "\n  " + p;
    throw SchemaError(msg);
  }
  return s;
}

Scaffold load_scaffold(const std::filesystem::path& path) {
  auto doc = parse_json_file(path);
  try {
    return scaffold_from_json(doc);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

ordered_json scaffold_to_json(const Scaffold& s) {
  ordered_json out;
  out["schema_version"] = kScaffoldSchemaVersion;
  out["scene_id"] = s.scene_id;
  out["frame_range"] = {s.frame_range.first, s.frame_range.last};
  out["image_dims"] = {{"width", s.image_dims.width}, {"height", s.image_dims.height}};
  ordered_json images = ordered_json::object();
  for (const auto& [f, cams] : s.images) {
    ordered_json per = ordered_json::object();
    for (const auto& [c, p] : cams) per[std::string(camera_name(c))] = p;
    images[std::to_string(f)] = per;
  }
  out["images"] = images;
  if (!s.ego_poses.is_null()) out["ego_poses"] = s.ego_poses;
  ordered_json elements = ordered_json::object();
  for (const auto& [kind, name] : kCollections) {
    ordered_json list = ordered_json::array();
    for (const auto& e : s.elements) {
      if (e.kind != kind) continue;
      ordered_json je;
      je["source_id"] = e.source_id;
      if (kind == ElementKind::TrafficElement) je["category"] = e.category;
      if (kind == ElementKind::Object) je["class"] = e.category;
      je["visible_frames"] = std::vector<int>(e.visible_frames.begin(), e.visible_frames.end());
      ordered_json markers = ordered_json::object();
      for (const auto& [f, ms] : e.markers) {
        ordered_json arr = ordered_json::array();
        for (const auto& m : ms) arr.push_back(marker_to_json(m));
        markers[std::to_string(f)] = arr;
      }
      je["markers"] = markers;
      ordered_json props = ordered_json::object();
      for (const auto& [k, v] : e.properties) props[k] = value_to_json(v);
      je["properties"] = props;
      if (!e.left_neighbor.empty()) je["left_neighbor"] = e.left_neighbor;
      if (!e.right_neighbor.empty()) je["right_neighbor"] = e.right_neighbor;
      if (!e.left_of.empty()) je["left_of"] = e.left_of;
      if (!e.right_of.empty()) je["right_of"] = e.right_of;
      if (!e.controls.empty()) je["controls"] = e.controls;
      if (!e.intersections.empty()) je["intersections"] = e.intersections;
      auto links = [](const std::map<Frame, std::string>& m) {
        ordered_json o = ordered_json::object();
        for (const auto& [f, id] : m) o[std::to_string(f)] = id;
        return o;
      };
      if (!e.in_lane.empty()) je["in_lane"] = links(e.in_lane);
      if (!e.in_intersection.empty()) je["in_intersection"] = links(e.in_intersection);
      list.push_back(je);
    }
    elements[name] = list;
  }
  out["elements"] = elements;
  return out;
}

std::string element_node_type(const ScaffoldElement& e, const Catalog& catalog) {
  switch (e.kind) {
    case ElementKind::LaneSegment:
      return catalog.type("lane");
    case ElementKind::LaneLine:
      return catalog.type("lane_line");
    case ElementKind::Intersection:
      return catalog.type("intersection");
    case ElementKind::Split:
      return "split";
    case ElementKind::Merge:
      return "merge";
    case ElementKind::PedestrianCrossing:
      return catalog.type("crossing");
    case ElementKind::TrafficElement:
      return catalog.type(e.category);
    case ElementKind::Object:
      return e.category;
  }
  return e.category;
}

SceneGraph graph_shell(const Scaffold& scaffold) {
  SceneGraph g;
  g.scene_id = scaffold.scene_id;
  g.frame_range = scaffold.frame_range;
  g.image_dims = scaffold.image_dims;
  g.images = scaffold.images;
  return g;
}

std::map<std::string, NodeId> transferred_map(const SceneGraph& graph) {
  std::map<std::string, NodeId> out;
  for (const auto& n : graph.nodes) {
    if (!n.source_id.empty()) out.emplace(n.source_id, n.id);
  }
  return out;
}

const Node& transfer_node(const ScaffoldElement& element, SceneGraph& graph, const Catalog& catalog) {
  for (const auto& n : graph.nodes) {
    if (n.source_id == element.source_id) {
      throw ConflictError("element '" + element.source_id + "' already transferred as node '" + n.id + "'");
    }
  }
  Node node;
  node.type = element_node_type(element, catalog);
  std::string prefix = capitalized(node.type) + "-";
  for (int k = 1;; ++k) {
    std::string id = prefix + std::to_string(k);
    if (!graph.find_node(id)) {
      node.id = id;
      break;
    }
  }
  node.properties = element.properties;
  node.markers = element.markers;
  node.visible_frames = element.visible_frames;
  node.source_id = element.source_id;
  if (node.type == catalog.type("ego")) node.is_unique = true;
  graph.nodes.push_back(std::move(node));
  return graph.nodes.back();
}

ProposalSet auto_edges(const SceneGraph& graph, const Scaffold& scaffold, const Catalog& catalog) {
  ProposalSet out;
  auto ids = transferred_map(graph);
  std::set<std::string> seen;

  auto propose = [&](const std::string& from, const std::string& to, PropertyValue label, const std::string& link) {
    auto s = ids.find(from);
    auto t = ids.find(to);
    if (s == ids.end() || t == ids.end()) {
      ++out.skipped_links;
      return;
    }
    for (const auto& e : graph.edges) {
      if (e.source == s->second && e.target == t->second && e.label == label) return;
    }
    std::string key = s->second + "|" + value_to_json(label).dump() + "|" + t->second;
    if (!seen.insert(key).second) return;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_text(key)));
    out.proposals.push_back(EdgeProposal{std::string("p-") + buf, s->second, t->second, std::move(label), link});
  };
  auto fixed = [&](const char* role) { return PropertyValue::fixed(catalog.label(role)); };
  auto per_frame = [&](const std::map<Frame, std::string>& links, const ScaffoldElement& e, const char* link) {
    std::map<std::string, std::map<Frame, std::string>> by_target;
    for (const auto& [f, id] : links) by_target[id][f] = catalog.label("is_in");
    for (auto& [id, frames] : by_target) propose(e.source_id, id, PropertyValue::temporal(frames), link);
  };

  for (const auto& e : scaffold.elements) {
    if (!e.left_neighbor.empty()) {
      propose(e.source_id, e.left_neighbor, fixed("right_of"), "left_neighbor");
      propose(e.left_neighbor, e.source_id, fixed("left_of"), "left_neighbor");
    }
    if (!e.right_neighbor.empty()) {
      propose(e.source_id, e.right_neighbor, fixed("left_of"), "right_neighbor");
      propose(e.right_neighbor, e.source_id, fixed("right_of"), "right_neighbor");
    }
    for (const auto& id : e.left_of) propose(e.source_id, id, fixed("left_marking"), "left_of");
    for (const auto& id : e.right_of) propose(e.source_id, id, fixed("right_marking"), "right_of");
    for (const auto& id : e.controls) {
      propose(e.source_id, id, fixed("controls"), "controls");
      propose(id, e.source_id, fixed("is_controlled_by"), "controls");
    }
    for (const auto& id : e.intersections) propose(e.source_id, id, fixed("is_on"), "intersections");
    per_frame(e.in_lane, e, "in_lane");
    per_frame(e.in_intersection, e, "in_intersection");
  }
  return out;
}

std::string accept_proposal(SceneGraph& graph, const EdgeProposal& p) {
  if (!graph.find_node(p.source) || !graph.find_node(p.target)) {
    throw NotFoundError("proposal '" + p.id + "' references a missing node");
  }
  std::string id;
  for (std::size_t k = graph.edges.size() + 1;; ++k) {
    id = "E-" + std::to_string(k);
    if (!graph.find_edge(id)) break;
  }
  graph.edges.push_back(Edge{id, p.source, p.target, p.label, false});
  return id;
}

ordered_json proposal_to_json(const EdgeProposal& p) {
  ordered_json out;
  out["id"] = p.id;
  out["source"] = p.source;
  out["target"] = p.target;
  out["label"] = value_to_json(p.label);
  out["link"] = p.link;
  return out;
}

}  // namespace crs
