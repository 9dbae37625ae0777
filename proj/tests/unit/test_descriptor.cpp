#include <doctest.h>

#include "crs/catalog.hpp"
#include "crs/descriptor.hpp"
#include "crs/error.hpp"
#include "crs/uniqueness.hpp"
#include "oracles.hpp"

using namespace crs;

namespace {

std::multiset<oracle::CandidateKey> keys_of(const std::vector<Descriptor>& ds) {
  std::multiset<oracle::CandidateKey> out;
  for (const auto& d : ds) out.insert({d.target, std::string(anchor_kind_name(d.kind)), d.hops});
  return out;
}

const Descriptor* find_text(const std::vector<Descriptor>& ds, const std::string& text) {
  for (const auto& d : ds) {
    if (d.text == text) return &d;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("marker rendering rounds half up") {
  CHECK(round_half_up(1.5) == 2);
  CHECK(round_half_up(2.5) == 3);
  CHECK(round_half_up(2.49) == 2);
  CHECK(round_half_up(-0.5) == 0);
  CHECK(render_marker({Camera::Center, Point{960.4, 210.5}}) == "<point>(960,211)</point>");
  CHECK(render_marker({Camera::Left, Box{1, 2.5, 3, 4}}) == "<box>(1,3,3,4)</box>");
}

TEST_CASE("indefinite article") {
  CHECK(indefinite_article("lane") == "a");
  CHECK(indefinite_article("intersection") == "an");
  CHECK(indefinite_article("Ego") == "an");
}

TEST_CASE("bus lane descriptors") {
  auto g = oracle::load_fixture("bus_lane.json");
  auto fg = frame_view(g, 3);
  const auto& style = default_catalog().render;

  auto lane = build_descriptors(fg, "Lane-1", 2, {}, style);
  const auto* via_bus = find_text(lane, "the lane that contains the bus with number 54D");
  REQUIRE(via_bus != nullptr);
  CHECK(via_bus->unique);
  CHECK(via_bus->hops == 1);
  CHECK(via_bus->kind == AnchorKind::Relation);
  CHECK(via_bus->anchor_node() == "Bus-1");
  REQUIRE(via_bus->deps.size() == 1);
  CHECK(via_bus->deps[0] == Dependency{"Bus-1", "contains", "Lane-1", 0});
  CHECK(render_descriptor(*via_bus, node_type_map(fg), style) == via_bus->text);
  CHECK(find_text(lane, "the rightmost lane") != nullptr);

  auto bus = build_descriptors(fg, "Bus-1", 0, {}, style);
  CHECK(find_text(bus, "the bus") != nullptr);
  CHECK(find_text(bus, "the bus with number 54D") != nullptr);
  CHECK(find_text(bus, "the bus at <box>(1302,480,1497,702)</box>") != nullptr);
}

TEST_CASE("two-hop chains list dependencies innermost first") {
  auto g = oracle::load_fixture("bus_lane.json");
  auto fg = frame_view(g, 0);
  auto lane2 = build_descriptors(fg, "Lane-2", 2, {}, default_catalog().render);
  bool seen = false;
  for (const auto& d : lane2) {
    if (d.hops != 2) continue;
    seen = true;
    REQUIRE(d.deps.size() == 2);
    CHECK(d.deps[0].hop_depth == 0);
    CHECK(d.deps[1].hop_depth == 1);
    CHECK(d.deps[1].downstream == "Lane-2");
    CHECK(d.deps[0].downstream == d.deps[1].intermediate);
    CHECK(d.deps[0].intermediate == d.anchor_node());
  }
  CHECK(seen);
}

TEST_CASE("candidate sets match the path enumerator for H = 0..3") {
  std::size_t compared = 0;
  for (const auto& g : oracle::all_clean_fixtures()) {
    for (Frame t = g.frame_range.first; t <= g.frame_range.last; ++t) {
      auto fg = frame_view(g, t);
      for (const auto& n : fg.nodes) {
        for (int h = 0; h <= 3; ++h) {
          CAPTURE(g.scene_id);
          CAPTURE(t);
          CAPTURE(n.id);
          CAPTURE(h);
          auto built = keys_of(build_descriptors(fg, n.id, h));
          auto expected = oracle::enumerate_candidates(g, t, n.id, h);
          CHECK(built == expected);
          ++compared;
        }
      }
    }
  }
  CHECK(compared > 1000);
}

TEST_CASE("cycles terminate under large budgets") {
  auto g = oracle::load_fixture("cyclic.json");
  auto fg = frame_view(g, 0);
  for (const auto& n : fg.nodes) {
    auto ds = build_descriptors(fg, n.id, 12);
    CHECK_FALSE(ds.empty());
    for (const auto& d : ds) {
      std::set<NodeId> on_path{d.target};
      for (const auto& dep : d.deps) CHECK(on_path.insert(dep.intermediate).second);
    }
  }
  auto car = build_descriptors(fg, "Car-1", 3);
  REQUIRE(car.size() == 1);
  CHECK(car[0].kind == AnchorKind::NonUnique);
  CHECK_FALSE(car[0].unique);
  CHECK(car[0].text == "a regular_vehicle");
}

TEST_CASE("unique candidates resolve to exactly their target") {
  const auto& style = default_catalog().render;
  std::size_t checked = 0;
  for (const auto& g : oracle::all_clean_fixtures()) {
    for (Frame t = g.frame_range.first; t <= g.frame_range.last; ++t) {
      auto fg = frame_view(g, t);
      for (const auto& n : fg.nodes) {
        for (const auto& d : build_descriptors(fg, n.id, 3, {}, style)) {
          if (!d.unique || d.terminal.kind == AnchorKind::PointMarker) continue;
          CAPTURE(d.text);
          auto hits = oracle::resolve(g, t, descriptor_to_json(d), style.description_key);
          CHECK(hits == std::set<std::string>{d.target});
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("descriptor errors") {
  auto g = oracle::load_fixture("scenes/scene-a.json");
  auto fg = frame_view(g, 0);
  CHECK_THROWS_AS(build_descriptors(fg, "Truck-1", 1), NotFoundError);
  CHECK_THROWS_AS(build_descriptors(fg, "Lane-1", -1), RangeError);
}

TEST_CASE("sampling honours uniqueness and the hop cap") {
  auto g = oracle::load_fixture("bus_lane.json");
  auto fg = frame_view(g, 0);
  auto ds = build_descriptors(fg, "Lane-1", 3);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    auto d = sample_descriptor(ds, rng, true, 1);
    REQUIRE(d.has_value());
    CHECK(d->unique);
    CHECK(d->hops <= 1);
  }
  std::vector<Descriptor> none{ds.front()};
  none[0].unique = false;
  CHECK_FALSE(sample_descriptor(none, rng, true, 3).has_value());
}

TEST_CASE("anchor collision checks") {
  auto g = oracle::load_fixture("five_frames.json");
  for (const auto& c : check_all_anchors(g)) {
    CAPTURE(c.anchor);
    CHECK(c.unique());
  }
  auto broken = g;
  for (auto& n : broken.nodes) {
    if (n.id == "Lane-1") n.is_unique = true;
  }
  auto check = check_node_anchor(broken, "Lane-1");
  CHECK_FALSE(check.unique());
  CHECK(check.collides_with() == std::vector<NodeId>{"Lane-2"});
}
