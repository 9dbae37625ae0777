#pragma once

// HTTP front end for the annotation store.

#include <filesystem>
#include <memory>
#include <string>

#include "crs/annotation.hpp"

namespace crs {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path image_root;  // served under /images when set
};

class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, const Catalog& catalog, ServerOptions options);
  ~AnnotationServer();

  /// Binds the socket and returns the bound port. Throws Error("io") on failure.
  int bind();
  /// Serves until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Availability and selection counts of every template at frame t.
nlohmann::ordered_json query_preview(const SceneGraph& graph, Frame t, const Catalog& catalog, int window = 4);

/// HTTP status for an error kind.
int http_status(const std::string& kind);

}  // namespace crs
