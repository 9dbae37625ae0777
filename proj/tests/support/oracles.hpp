#pragma once

// Independent reference implementations used by the tests. They work from
// the SceneGraph and emitted JSON only and never call the library's
// descriptor, selection or statistics code.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/graph.hpp"

namespace oracle {

std::filesystem::path fixture(const std::string& rel);
std::vector<std::filesystem::path> fixture_scene_files();
crs::SceneGraph load_fixture(const std::string& rel);
std::vector<crs::SceneGraph> fixture_scenes();
std::vector<crs::SceneGraph> all_clean_fixtures();  // scenes + bus_lane + cyclic + five_frames

/// (target, anchor_kind, hops)
using CandidateKey = std::tuple<std::string, std::string, int>;

/// Enumerates simple paths over unique edges of frame t up to `hops` and
/// classifies the anchor each path ends in.
std::multiset<CandidateKey> enumerate_candidates(const crs::SceneGraph& g, crs::Frame t, const std::string& node,
                                                 int hops);

/// Brute-force resolution of a descriptor given as JSON (the shape emitted in
/// sample metadata). Returns every visible node the descriptor matches.
std::set<std::string> resolve(const crs::SceneGraph& g, crs::Frame t, const nlohmann::json& descriptor,
                              const std::string& description_key = "description");

/// Expected (bucket, reasoning_split) per template id.
const std::map<std::string, std::pair<std::string, std::string>>& taxonomy();
/// Graph relations each template walks beyond its descriptors.
const std::map<std::string, int>& traversal_counts();
/// Depth recomputed from sample metadata: hops are taken as the number of
/// dependency records of each distinct descriptor.
int recount_depth(const nlohmann::json& sample);

/// Node types whose completeness flag must be set for the template, by id.
const std::map<std::string, std::vector<std::string>>& gating_requirements();

/// Queried frames: t >= first + w - 1.
int count_queried_frames(int first, int last, int window);

std::vector<nlohmann::json> parse_jsonl(const std::string& text);
std::string read_file(const std::filesystem::path& p);

}  // namespace oracle
