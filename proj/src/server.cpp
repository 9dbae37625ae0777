#include "crs/server.hpp"

#include <httplib.h>

#include "crs/canonical.hpp"
#include "crs/templates.hpp"
#include "crs/graph_io.hpp"
#include "crs/uniqueness.hpp"

namespace crs {

using nlohmann::json;
using nlohmann::ordered_json;

int http_status(const std::string& kind) {
  if (kind == "not_found") return 404;
  if (kind == "conflict") return 409;
  if (kind == "invalid_command" || kind == "range" || kind == "parse") return 400;
  if (kind == "canonical" || kind == "schema") return 422;
  return 500;
}

namespace {

void send_json(httplib::Response& res, const ordered_json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::string& kind, const std::string& message) {
  ordered_json body;
  body["error"]["kind"] = kind;
  body["error"]["message"] = message;
  send_json(res, body, http_status(kind));
}

int int_param(const httplib::Request& req, const char* name) {
  auto text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidCommandError(std::string("query parameter '") + name + "' must be an integer");
  }
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body.empty() ? std::string("{}") : req.body);
  } catch (const json::exception& e) {
    throw ParseError(std::string("request body is not JSON: ") + e.what());
  }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Error& e) {
      send_error(res, e.kind(), e.what());
    } catch (const json::exception& e) {
      send_error(res, "invalid_command", e.what());
    } catch (const std::exception& e) {
      send_error(res, "internal", e.what());
    }
  };
}

ordered_json apply_response(const ApplyResult& r) {
  ordered_json body;
  body["revision"] = r.revision;
  body["delta"] = r.result.delta;
  body["warnings"] = r.result.warnings;
  if (!r.result.anchor_check.is_null()) body["anchor_check"] = r.result.anchor_check;
  return body;
}

ordered_json frame_overlay(const SceneGraph& g, const std::optional<Scaffold>& scaffold, Frame t) {
  auto fg = frame_view(g, t);
  ordered_json out;
  out["scene_id"] = g.scene_id;
  out["frame"] = t;
  ordered_json images = ordered_json::object();
  if (auto it = g.images.find(t); it != g.images.end()) {
    for (const auto& [cam, path] : it->second) images[std::string(camera_name(cam))] = path;
  }
  out["images"] = images;
  auto overlays = ordered_json::array();
  for (const auto& n : fg.nodes) {
    for (const auto& m : n.markers) {
      ordered_json o;
      o["node"] = n.id;
      o["type"] = n.type;
      o["marker"] = marker_to_json(m);
      overlays.push_back(o);
    }
  }
  out["overlays"] = overlays;
  auto elements = ordered_json::array();
  if (scaffold) {
    auto transferred = transferred_map(g);
    for (const auto& e : scaffold->elements) {
      auto it = e.markers.find(t);
      if (it == e.markers.end()) continue;
      for (const auto& m : it->second) {
        ordered_json o;
        o["source_id"] = e.source_id;
        o["kind"] = element_collection(e.kind);
        auto node = transferred.find(e.source_id);
        o["node"] = node == transferred.end() ? ordered_json(nullptr) : ordered_json(node->second);
        o["marker"] = marker_to_json(m);
        elements.push_back(o);
      }
    }
  }
  out["scaffold_overlays"] = elements;
  ordered_json complete = ordered_json::object();
  for (const auto& [key, flag] : g.completeness) {
    if (key.first == t) complete[key.second] = flag;
  }
  out["completeness"] = complete;
  return out;
}

}  // namespace

ordered_json query_preview(const SceneGraph& g, Frame t, const Catalog& catalog, int window) {
  auto fg = frame_view(g, t);
  auto rows = ordered_json::array();
  for (const auto& tpl : all_templates()) {
    auto selections = select(tpl, g, fg, catalog, window);
    ordered_json row;
    row["template_id"] = tpl.name;
    row["available"] = availability(tpl, g, fg, catalog, window);
    row["selections"] = selections.size();
    rows.push_back(row);
  }
  ordered_json out;
  out["scene_id"] = g.scene_id;
  out["frame"] = t;
  out["templates"] = rows;
  return out;
}

struct AnnotationServer::Impl {
  AnnotationStore& store;
  const Catalog& catalog;
  ServerOptions options;
  httplib::Server http;
  int port = -1;

  Impl(AnnotationStore& s, const Catalog& c, ServerOptions o) : store(s), catalog(c), options(std::move(o)) {
    routes();
  }

  void routes() {
    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}});
    });

    http.Get("/scenes", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto arr = ordered_json::array();
      for (const auto& id : store.list_scenes()) arr.push_back({{"scene_id", id}, {"revision", store.revision(id)}});
      send_json(res, {{"scenes", arr}});
    }));

    http.Post("/scenes", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.contains("graph")) throw InvalidCommandError("body needs 'graph'");
      auto graph = graph_from_json(body["graph"]);
      std::optional<Scaffold> scaffold;
      if (body.contains("scaffold")) scaffold = scaffold_from_json(body["scaffold"]);
      store.create_scene(graph, scaffold ? &*scaffold : nullptr);
      send_json(res, {{"scene_id", graph.scene_id}, {"revision", 0}}, 201);
    }));

    http.Get(R"(/scenes/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      int current = store.revision(id);
      int rev = req.has_param("revision") ? int_param(req, "revision") : current;
      SceneGraph g = rev == current ? store.graph(id) : store.graph_at(id, rev);
      ordered_json body;
      body["revision"] = rev;
      body["latest_revision"] = current;
      if (req.has_param("frame")) {
        body["frame_graph"] = frame_graph_to_json(frame_view(g, int_param(req, "frame")));
      } else {
        body["graph"] = graph_to_json(g);
      }
      send_json(res, body);
    }));

    http.Post(R"(/scenes/([^/]+)/commands)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, apply_response(store.apply(req.matches[1], parse_body(req))));
    }));

    http.Get(R"(/scenes/([^/]+)/proposals)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto set = store.proposals(req.matches[1]);
      auto arr = ordered_json::array();
      for (const auto& p : set.proposals) arr.push_back(proposal_to_json(p));
      send_json(res, {{"proposals", arr}, {"skipped_links", set.skipped_links}});
    }));

    http.Post(R"(/scenes/([^/]+)/proposals/([^/]+)/accept)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto body = parse_body(req);
                json cmd = {{"kind", "accept_proposal"}, {"proposal", std::string(req.matches[2])}};
                cmd["revision"] = body.value("revision", -1);
                send_json(res, apply_response(store.apply(req.matches[1], cmd)));
              }));

    http.Get(R"(/scenes/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(store.export_graph(req.matches[1]), "application/json");
    }));

    http.Get(R"(/scenes/([^/]+)/validate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto g = store.graph(req.matches[1]);
      auto anchors = ordered_json::array();
      for (const auto& c : check_all_anchors(g)) {
        if (!c.unique()) anchors.push_back(anchor_check_to_json(c));
      }
      send_json(res, {{"canonical", canonical_report_to_json(validate_canonical(g))}, {"anchor_collisions", anchors}});
    }));

    http.Get(R"(/scenes/([^/]+)/frames/(-?\d+)/images)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               send_json(res, frame_overlay(store.graph(id), store.scaffold(id), std::stoi(req.matches[2])));
             }));

    http.Get(R"(/scenes/([^/]+)/frames/(-?\d+)/preview)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto g = store.graph(req.matches[1]);
               int window = req.has_param("window") ? int_param(req, "window") : 4;
               send_json(res, query_preview(g, std::stoi(req.matches[2]), catalog, window));
             }));

    http.Get("/commands", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"kinds", command_kinds()}});
    });

    if (!options.image_root.empty()) http.set_mount_point("/images", options.image_root.string());
  }
};

AnnotationServer::AnnotationServer(AnnotationStore& store, const Catalog& catalog, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, catalog, std::move(options))) {}

AnnotationServer::~AnnotationServer() = default;

int AnnotationServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->http.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) throw Error("io", "cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void AnnotationServer::run() { impl_->http.listen_after_bind(); }

void AnnotationServer::stop() { impl_->http.stop(); }

}  // namespace crs
