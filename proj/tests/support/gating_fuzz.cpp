#include "gating_fuzz.hpp"

#include <random>

#include "crs/catalog.hpp"
#include "crs/pipeline.hpp"
#include "oracles.hpp"

namespace oracle {

FuzzOutcome completeness_fuzz(std::size_t min_cases, std::uint64_t seed) {
  const auto& catalog = crs::default_catalog();
  auto bases = fixture_scenes();
  bases.push_back(load_fixture("five_frames.json"));
  bases.push_back(load_fixture("bus_lane.json"));

  crs::GenerationConfig cfg = crs::GenerationConfig::from_catalog(catalog);
  for (const auto& [name, types] : gating_requirements()) cfg.templates_enabled.insert(*crs::parse_template_id(name));
  cfg.emit_cot = false;

  std::mt19937_64 rng(seed);
  FuzzOutcome out;
  for (std::size_t round = 0; out.cases < min_cases; ++round) {
    auto g = bases[round % bases.size()];
    g.completeness.clear();
    std::uniform_int_distribution<int> pick(0, 2);  // absent, false, true
    for (int t = g.frame_range.first; t <= g.frame_range.last; ++t) {
      for (const char* type : {"lane", "crossing"}) {
        int v = pick(rng);
        if (v > 0) g.completeness[{t, type}] = v == 2;
      }
    }
    cfg.master_seed = rng();
    auto result = crs::generate_scene(g, cfg, catalog);
    out.cases += result.queried_frames;
    for (const auto& s : result.samples) {
      ++out.emitted;
      const std::string name(crs::template_info(s.plan.template_id).name);
      for (const auto& type : gating_requirements().at(name)) {
        auto it = g.completeness.find({s.plan.frame, type});
        if (it == g.completeness.end() || !it->second) {
          ++out.violations;
          if (out.examples.size() < 5) {
            out.examples.push_back(g.scene_id + "@" + std::to_string(s.plan.frame) + " " + name + " without " + type);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
