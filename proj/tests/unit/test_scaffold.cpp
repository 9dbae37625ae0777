#include <doctest.h>

#include "crs/catalog.hpp"
#include "crs/error.hpp"
#include "crs/graph_io.hpp"
#include "crs/scaffold.hpp"
#include "oracles.hpp"

using namespace crs;
using nlohmann::json;

namespace {

SceneGraph transfer_all(const Scaffold& s) {
  auto g = graph_shell(s);
  for (const auto& e : s.elements) transfer_node(e, g, default_catalog());
  return g;
}

}  // namespace

TEST_CASE("scaffold loads with the expected element counts") {
  auto s = load_scaffold(oracle::fixture("demo_scaffold.json"));
  auto manifest = json::parse(oracle::read_file(oracle::fixture("demo_scaffold_manifest.json")));
  CHECK(s.scene_id == manifest["scene_id"]);
  auto counts = s.counts();
  for (const auto& [collection, n] : manifest["counts"].items()) {
    CAPTURE(collection);
    CHECK(counts[collection] == n.get<std::size_t>());
  }
}

TEST_CASE("scaffold json round trip") {
  auto s = load_scaffold(oracle::fixture("demo_scaffold.json"));
  auto again = scaffold_from_json(json::parse(scaffold_to_json(s).dump()));
  CHECK(scaffold_to_json(again).dump() == scaffold_to_json(s).dump());
}

TEST_CASE("dangling helper links name both ids") {
  try {
    load_scaffold(oracle::fixture("dangling_scaffold.json"));
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    std::string msg = e.what();
    CHECK(msg.find("ls-999") != std::string::npos);
  }
}

TEST_CASE("proposals per label match the manifest") {
  auto s = load_scaffold(oracle::fixture("demo_scaffold.json"));
  auto manifest = json::parse(oracle::read_file(oracle::fixture("demo_scaffold_manifest.json")));
  auto g = transfer_all(s);
  CHECK_NOTHROW(g.check());
  auto set = auto_edges(g, s, default_catalog());
  std::map<std::string, int> per_label;
  for (const auto& p : set.proposals) {
    for (const auto& v : p.label.all_values()) {
      ++per_label[v];
      break;
    }
  }
  std::map<std::string, int> expected;
  for (const auto& [label, n] : manifest["expected_proposals"].items()) expected[label] = n;
  CHECK(per_label == expected);
  CHECK(set.skipped_links == 0);
  CHECK(per_label.count("contains") == 0);
}

TEST_CASE("transferring twice is a conflict") {
  auto s = load_scaffold(oracle::fixture("demo_scaffold.json"));
  auto g = graph_shell(s);
  transfer_node(s.elements.front(), g, default_catalog());
  CHECK_THROWS_AS(transfer_node(s.elements.front(), g, default_catalog()), ConflictError);
  CHECK(transferred_map(g).size() == 1);
}

TEST_CASE("links with an untransferred endpoint are skipped") {
  auto s = load_scaffold(oracle::fixture("demo_scaffold.json"));
  auto g = graph_shell(s);
  for (const auto& e : s.elements) {
    if (e.kind == ElementKind::LaneSegment) transfer_node(e, g, default_catalog());
  }
  auto set = auto_edges(g, s, default_catalog());
  CHECK(set.skipped_links > 0);
  for (const auto& p : set.proposals) {
    CHECK(g.find_node(p.source) != nullptr);
    CHECK(g.find_node(p.target) != nullptr);
  }
}

TEST_CASE("accepted proposals are not proposed again") {
  auto s = load_scaffold(oracle::fixture("demo_scaffold.json"));
  auto g = transfer_all(s);
  auto first = auto_edges(g, s, default_catalog());
  REQUIRE_FALSE(first.proposals.empty());
  auto again = auto_edges(g, s, default_catalog());
  REQUIRE(again.proposals.size() == first.proposals.size());
  for (std::size_t i = 0; i < first.proposals.size(); ++i) CHECK(again.proposals[i].id == first.proposals[i].id);

  auto id = accept_proposal(g, first.proposals.front());
  CHECK(g.find_edge(id) != nullptr);
  auto after = auto_edges(g, s, default_catalog());
  CHECK(after.proposals.size() == first.proposals.size() - 1);
  for (const auto& p : after.proposals) CHECK(p.id != first.proposals.front().id);
}
