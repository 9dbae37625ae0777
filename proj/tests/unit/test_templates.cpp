#include <doctest.h>

#include <algorithm>

#include "crs/catalog.hpp"
#include "crs/cot.hpp"
#include "crs/error.hpp"
#include "crs/templates.hpp"
#include "oracles.hpp"

using namespace crs;

namespace {

struct WorkedRun {
  SamplePlan plan;
  CoTTrace cot;
};

WorkedRun run_worked_example(std::uint64_t seed) {
  static const auto g = oracle::load_fixture("bus_lane.json");
  static const auto fg = frame_view(g, 3);
  const auto& catalog = default_catalog();
  const auto& tpl = template_info(TemplateId::LaneType);
  auto cfg = PlanConfig::from_catalog(catalog);
  cfg.nota_correct_probability = 0.0;
  cfg.prefer_text["Lane-1"] = "the lane that contains the bus with number 54D";
  PlanContext ctx{g, fg, catalog, cfg};

  auto sels = select(tpl, g, fg, catalog);
  auto it = std::find_if(sels.begin(), sels.end(),
                         [](const TargetSelection& s) { return s.nodes == std::vector<NodeId>{"Lane-1"}; });
  REQUIRE(it != sels.end());
  Rng rng(seed);
  auto outcome = plan(tpl, ctx, *it, static_cast<std::size_t>(it - sels.begin()), rng);
  REQUIRE_MESSAGE(outcome.plan.has_value(), outcome.rejection);
  auto cot = build_cot(*outcome.plan, fg, catalog, rng, FactBudget::from_catalog(catalog));
  return {*outcome.plan, cot};
}

}  // namespace

TEST_CASE("nineteen templates with the expected taxonomy") {
  const auto& all = all_templates();
  REQUIRE(all.size() == 19);
  const auto& expected = oracle::taxonomy();
  for (const auto& t : all) {
    CAPTURE(t.name);
    auto it = expected.find(std::string(t.name));
    REQUIRE(it != expected.end());
    CHECK(bucket_name(t.bucket) == it->second.first);
    CHECK(split_name(t.split) == it->second.second);
    CHECK(parse_template_id(t.name) == std::optional<TemplateId>(t.id));
    CHECK(t.traversals == oracle::traversal_counts().at(std::string(t.name)));
    std::vector<std::string> gates;
    if (auto g = oracle::gating_requirements().find(std::string(t.name)); g != oracle::gating_requirements().end()) {
      gates = g->second;
    }
    CHECK(completeness_types(t, default_catalog()) == gates);
  }
  CHECK_FALSE(parse_template_id("lane_colour").has_value());
}

TEST_CASE("bus lane worked example") {
  auto run = run_worked_example(11);
  const auto& p = run.plan;
  CHECK(p.question == "What is the type of the lane that contains the bus with number 54D?");
  CHECK(p.answer_text == "bike lane");
  CHECK(p.correct_option == "bike lane");
  CHECK(p.reasoning_depth == 1);

  REQUIRE(run.cot.steps.size() == 4);
  CHECK(run.cot.steps[0].text ==
        "Identify the bus with number 54D, which is visible in the CENTER view at <box>(1302,480,1497,702)</box>.");
  CHECK(run.cot.steps[1].text ==
        "The lane in question is the lane that contains that bus, and is visible in the CENTER view at "
        "<box>(1210,640,1600,1080)</box>.");
  CHECK(run.cot.steps[2].text ==
        "The lane's description is rightmost lane. The lane is controlled by a traffic_light with status green "
        "located in the CENTER view at <point>(960,211)</point>.");
  CHECK(run.cot.steps[3].text == "The lane's type is bike.");
  CHECK(run.cot.conclusion == "Therefore, the correct answer is: bike lane");
  for (std::size_t i = 0; i < 4; ++i) CHECK(run.cot.steps[i].label == "Step " + std::to_string(i + 1) + ":");
  CHECK(run.cot.steps[0].nodes == std::vector<NodeId>{"Bus-1"});
  CHECK(run.cot.steps[1].nodes == std::vector<NodeId>{"Lane-1"});

  std::vector<std::string> decoys;
  for (const auto& d : p.decoys) decoys.push_back(d.text);
  CHECK(decoys.size() == 3);
  CHECK(std::find(decoys.begin(), decoys.end(), "bike lane") == decoys.end());
}

TEST_CASE("worked example trace text is seed independent") {
  CHECK(run_worked_example(1).cot.text() == run_worked_example(99).cot.text());
}

TEST_CASE("question descriptors never give the answer away") {
  auto g = oracle::load_fixture("bus_lane.json");
  auto fg = frame_view(g, 3);
  const auto& catalog = default_catalog();
  const auto& tpl = template_info(TemplateId::LaneType);
  for (const auto& sel : select(tpl, g, fg, catalog)) {
    auto r = restriction_for(tpl, sel, sel.nodes.front(), catalog);
    CHECK(r.excluded_keys.count("type"));
    for (const auto& d : usable_descriptors(fg, sel.nodes.front(), 2, r, catalog.render)) {
      CHECK_FALSE((d.terminal.node == sel.nodes.front() && d.terminal.kind == AnchorKind::Property &&
                   d.terminal.key == "type"));
    }
  }
}

TEST_CASE("counting templates are unavailable without the completeness flag") {
  auto g = oracle::load_fixture("five_frames.json");
  const auto& catalog = default_catalog();
  const auto& generic = template_info(TemplateId::CountingGeneric);
  const auto& crossing = template_info(TemplateId::CountingCrossing);
  CHECK_FALSE(availability(generic, g, 2, catalog));
  CHECK(availability(generic, g, 3, catalog));
  CHECK_FALSE(availability(crossing, g, 3, catalog));
  CHECK(availability(crossing, g, 4, catalog));
}

TEST_CASE("decoys are distinct and never the answer") {
  const auto& catalog = default_catalog();
  for (const auto& g : oracle::fixture_scenes()) {
    auto fg = frame_view(g, g.frame_range.last);
    auto cfg = PlanConfig::from_catalog(catalog);
    PlanContext ctx{g, fg, catalog, cfg};
    for (const auto& tpl : all_templates()) {
      auto sels = select(tpl, g, fg, catalog);
      for (std::size_t i = 0; i < sels.size(); ++i) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
          Rng rng(seed * 31 + i);
          auto out = plan(tpl, ctx, sels[i], i, rng);
          if (!out.plan) continue;
          const auto& p = *out.plan;
          CAPTURE(p.question);
          std::set<std::string> texts{p.correct_option};
          for (const auto& d : p.decoys) {
            CHECK(d.text != p.answer_text);
            CHECK(texts.insert(d.text).second);
            if (!d.counts.empty()) CHECK(d.counts != p.answer_counts);
          }
          CHECK(texts.size() == 4);
        }
      }
    }
  }
}

TEST_CASE("catalog validation") {
  auto doc = nlohmann::json::parse(default_catalog_text());
  CHECK_NOTHROW(catalog_from_json(doc));
  auto missing = doc;
  missing["templates"].erase("lane_type");
  CHECK_THROWS_AS(catalog_from_json(missing), SchemaError);
  auto version = doc;
  version["catalog_version"] = 99;
  CHECK_THROWS_AS(catalog_from_json(version), SchemaError);
}
