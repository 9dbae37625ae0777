// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "crs/catalog.hpp"
#include "crs/cot.hpp"
#include "crs/descriptor.hpp"
#include "crs/graph_io.hpp"
#include "crs/pipeline.hpp"
#include "crs/templates.hpp"
#include "gating_fuzz.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crs;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

Verdict fail(std::string why) { return {false, std::move(why)}; }

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

int run_cli(const std::string& args, std::string* out = nullptr) {
  std::string cmd = std::string(CRS_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::array<char, 4096> buf{};
  std::size_t n;
  std::string text;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) text.append(buf.data(), n);
  int raw = ::pclose(pipe);
  if (out) *out = std::move(text);
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

fs::path scratch_dir(const std::string& tag) {
  std::random_device rd;
  auto p = fs::temp_directory_path() / ("crs-accept-" + tag + "-" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

std::vector<json> generated_samples(std::uint64_t seed) {
  GenerationConfig cfg = GenerationConfig::from_catalog(default_catalog());
  cfg.master_seed = seed;
  return oracle::parse_jsonl(samples_to_jsonl(generate(oracle::fixture_scenes(), cfg, default_catalog()).samples));
}

// ---------------------------------------------------------------------------

Verdict uniqueness_oracle() {
  auto start = std::chrono::steady_clock::now();
  auto scenes = oracle::fixture_scenes();
  if (scenes.size() < 3) return fail("fewer than 3 fixture scenes");
  for (const auto& g : scenes) {
    if (g.nodes.size() < 15) return fail(g.scene_id + " has fewer than 15 nodes");
  }
  std::map<std::string, const SceneGraph*> by_id;
  for (const auto& g : scenes) by_id[g.scene_id] = &g;
  const auto& desc_key = default_catalog().render.description_key;

  std::size_t checked = 0, violations = 0;
  std::string first;
  auto note = [&](const std::string& what) {
    ++violations;
    if (first.empty()) first = what;
  };
  for (const auto& s : generated_samples(7)) {
    const auto& g = *by_id.at(s["scene_id"]);
    Frame t = s["metadata"]["frame"];
    for (const auto& d : s["metadata"]["descriptors"]) {
      if (!d["unique"].get<bool>() || d["anchor"]["kind"] == "point_marker") continue;
      ++checked;
      auto hits = oracle::resolve(g, t, d, desc_key);
      if (hits != std::set<std::string>{d["target"].get<std::string>()}) note(d["text"].get<std::string>());
    }
  }
  for (const auto& g : scenes) {
    for (Frame t = g.frame_range.first; t <= g.frame_range.last; ++t) {
      auto fg = frame_view(g, t);
      for (const auto& n : fg.nodes) {
        for (const auto& d : build_descriptors(fg, n.id, 3, {}, default_catalog().render)) {
          if (!d.unique || d.terminal.kind == AnchorKind::PointMarker) continue;
          ++checked;
          if (oracle::resolve(g, t, descriptor_to_json(d), desc_key) != std::set<std::string>{d.target}) {
            note(d.text);
          }
        }
      }
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream msg;
  msg << checked << " descriptors, " << violations << " violations, " << secs << " s";
  if (violations) return fail(msg.str() + "; first: " + first);
  if (checked == 0) return fail("nothing checked");
  if (secs >= 10.0) return fail(msg.str());
  return {true, msg.str()};
}

Verdict enumerator_equivalence() {
  std::size_t compared = 0;
  bool cyclic_seen = false;
  for (const auto& g : oracle::all_clean_fixtures()) {
    cyclic_seen |= g.scene_id == "cyclic";
    for (Frame t = g.frame_range.first; t <= g.frame_range.last; ++t) {
      auto fg = frame_view(g, t);
      for (const auto& n : fg.nodes) {
        for (int h = 0; h <= 3; ++h) {
          std::set<oracle::CandidateKey> built;
          for (const auto& d : build_descriptors(fg, n.id, h)) {
            built.insert({d.target, std::string(anchor_kind_name(d.kind)), d.hops});
          }
          auto all = oracle::enumerate_candidates(g, t, n.id, h);
          std::set<oracle::CandidateKey> expected(all.begin(), all.end());
          ++compared;
          if (built != expected) {
            return fail(g.scene_id + "@" + std::to_string(t) + " " + n.id + " H=" + std::to_string(h));
          }
        }
      }
    }
  }
  if (!cyclic_seen) return fail("cyclic fixture missing");
  return {true, std::to_string(compared) + " (node, frame, H) candidate sets equal"};
}

Verdict worked_example() {
  auto g = oracle::load_fixture("bus_lane.json");
  auto fg = frame_view(g, 3);
  const auto& catalog = default_catalog();
  const auto& tpl = template_info(TemplateId::LaneType);
  auto cfg = PlanConfig::from_catalog(catalog);
  cfg.nota_correct_probability = 0.0;
  const std::string wanted = "the lane that contains the bus with number 54D";
  cfg.prefer_text["Lane-1"] = wanted;

  auto sels = select(tpl, g, fg, catalog);
  auto it = std::find_if(sels.begin(), sels.end(), [](const TargetSelection& s) { return s.nodes.front() == "Lane-1"; });
  if (it == sels.end()) return fail("no lane_type selection for Lane-1");
  auto usable = usable_descriptors(fg, "Lane-1", cfg.hop_cap, restriction_for(tpl, *it, "Lane-1", catalog),
                                   catalog.render);
  if (std::none_of(usable.begin(), usable.end(), [&](const Descriptor& d) { return d.text == wanted; })) {
    return fail("descriptor variant not among the candidates");
  }
  Rng rng(2024);
  auto outcome = plan(tpl, PlanContext{g, fg, catalog, cfg}, *it, it - sels.begin(), rng);
  if (!outcome.plan) return fail("plan rejected: " + outcome.rejection);
  const auto& p = *outcome.plan;
  if (p.question != "What is the type of the lane that contains the bus with number 54D?") return fail(p.question);
  if (p.answer_text != "bike lane") return fail(p.answer_text);
  auto cot = build_cot(p, fg, catalog, rng, FactBudget::from_catalog(catalog));
  const std::string expected =
      "Step 1: Identify the bus with number 54D, which is visible in the CENTER view at "
      "<box>(1302,480,1497,702)</box>.\n"
      "Step 2: The lane in question is the lane that contains that bus, and is visible in the CENTER view at "
      "<box>(1210,640,1600,1080)</box>.\n"
      "Step 3: The lane's description is rightmost lane. The lane is controlled by a traffic_light with status "
      "green located in the CENTER view at <point>(960,211)</point>.\n"
      "Step 4: The lane's type is bike.\n"
      "Conclusion: Therefore, the correct answer is: bike lane";
  if (cot.text() != expected) return fail("trace differs:\n" + cot.text());
  return {true, "question, answer and 4-step trace match"};
}

Verdict determinism() {
  auto dir = scratch_dir("det");
  auto scenes = quote(oracle::fixture("scenes"));
  auto a = dir / "a.jsonl", b = dir / "b.jsonl", c = dir / "c.jsonl";
  if (run_cli("generate --seed 7 --out " + quote(a) + " " + scenes) != 0 ||
      run_cli("generate --seed 7 --jobs 2 --out " + quote(b) + " " + scenes) != 0 ||
      run_cli("generate --seed 8 --out " + quote(c) + " " + scenes) != 0) {
    fs::remove_all(dir);
    return fail("generate failed");
  }
  auto ta = oracle::read_file(a), tb = oracle::read_file(b), tc = oracle::read_file(c);
  fs::remove_all(dir);
  if (ta.empty()) return fail("empty output");
  if (ta != tb) return fail("two runs with the same seed differ");
  if (ta.find("\"cot\"") == std::string::npos) return fail("no traces in output");

  std::map<std::string, json> first;
  for (const auto& s : oracle::parse_jsonl(ta)) first[s["sample_id"]] = s["options"];
  std::size_t reordered = 0;
  for (const auto& s : oracle::parse_jsonl(tc)) {
    auto it = first.find(s["sample_id"]);
    if (it != first.end() && it->second != s["options"]) ++reordered;
  }
  if (reordered == 0) return fail("changing the seed left every option list unchanged");
  return {true, "identical bytes (" + std::to_string(ta.size()) + "); seed change altered " +
                    std::to_string(reordered) + " option lists"};
}

Verdict decoy_contract() {
  std::size_t n = 0, counting = 0;
  const std::string nota = default_catalog().nota_text;
  for (std::uint64_t seed = 1; n < 1000; ++seed) {
    for (const auto& s : generated_samples(seed)) {
      ++n;
      const auto& m = s["metadata"];
      const auto& options = s["options"];
      std::string id = s["sample_id"];
      if (options.size() != 4) return fail(id + ": option count");
      std::set<std::string> distinct(options.begin(), options.end());
      if (distinct.size() != 4) return fail(id + ": duplicate options");
      std::size_t ci = s["correct_index"];
      if (ci >= 4) return fail(id + ": correct index");
      const std::string answer = m["answer"];
      bool nota_correct = m["correct_is_none_of_the_above"];
      std::string correct = options[ci];
      if (nota_correct ? correct != nota : correct != answer) return fail(id + ": wrong correct option");
      int answer_hits = static_cast<int>(std::count(options.begin(), options.end(), answer));
      if (answer_hits != (nota_correct ? 0 : 1)) return fail(id + ": answer appears " + std::to_string(answer_hits) + "x");
      for (const auto& d : m["decoys"]) {
        if (d["text"] == answer) return fail(id + ": decoy equals answer");
        if (d.contains("counts")) {
          ++counting;
          if (!m.contains("answer_counts") || d["counts"] == m["answer_counts"]) return fail(id + ": counting decoy");
        }
      }
    }
  }
  if (counting == 0) return fail("no counting decoys seen");
  return {true, std::to_string(n) + " samples, " + std::to_string(counting) + " counting decoys"};
}

Verdict completeness_gating() {
  auto o = oracle::completeness_fuzz(10000, 20240611);
  std::string msg = std::to_string(o.cases) + " cases, " + std::to_string(o.emitted) + " gated samples, " +
                    std::to_string(o.violations) + " violations";
  if (o.violations) return fail(msg + "; e.g. " + o.examples.front());
  if (o.cases < 10000 || o.emitted == 0) return fail(msg);
  return {true, msg};
}

Verdict depth_bucketing() {
  auto samples = generated_samples(7);
  for (const auto& s : samples) {
    if (s["metadata"]["reasoning_depth"] != oracle::recount_depth(s)) {
      return fail(s["sample_id"].get<std::string>() + ": depth " + s["metadata"]["reasoning_depth"].dump() +
                  " vs recount " + std::to_string(oracle::recount_depth(s)));
    }
  }
  auto rows = question_type_report(samples);
  std::set<std::string> seen;
  for (const auto& r : rows) {
    auto it = oracle::taxonomy().find(r.template_id);
    if (it == oracle::taxonomy().end()) return fail("unknown template " + r.template_id);
    if (r.bucket != it->second.first || r.reasoning_split != it->second.second) return fail("labels of " + r.template_id);
    seen.insert(r.template_id);
  }
  if (seen.size() != 19) return fail(std::to_string(seen.size()) + " templates in report");
  return {true, std::to_string(samples.size()) + " depths recounted; 19 report rows labelled correctly"};
}

Verdict stats_format() {
  for (auto [input, golden] : {std::pair<std::string, std::string>{"scenes", "stats_golden.json"},
                               {"five_frames.json", "five_frames_stats_golden.json"}}) {
    std::string out;
    if (run_cli("stats --format json " + quote(oracle::fixture(input)), &out) != 0) return fail("stats failed");
    auto got = json::parse(out);
    auto want = json::parse(oracle::read_file(oracle::fixture(golden)));
    if (got["scenes"] != want["expected"]["scenes"]) return fail(input + ": scene count");
    if (got["statistics"].size() + 1 != want["expected"].size()) return fail(input + ": field set");
    for (const auto& [field, pair] : want["expected"].items()) {
      if (field == "scenes") continue;
      if (!got["statistics"].contains(field)) return fail(input + ": missing " + field);
      const auto& f = got["statistics"][field];
      if (f["total"] != pair[0] || f["mean"] != pair[1]) return fail(input + ": " + field + " = " + f.dump());
    }
  }
  auto g = oracle::load_fixture("five_frames.json");
  if (g.frame_range.size() != 5) return fail("five-frame fixture");
  if (queried_frames(g, 4).size() != 2 || oracle::count_queried_frames(0, 4, 4) != 2) return fail("queried frames");
  return {true, "all fields equal the goldens; 5 frames with w=4 give 2 queried frames"};
}

Verdict validation_split_check() {
  auto samples = generated_samples(7);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& s : samples) pairs.emplace(s["scene_id"].get<std::string>(), s["metadata"]["template_id"].get<std::string>());
  if (pairs.size() != 19 * 3) return fail("only " + std::to_string(pairs.size()) + " pairs populated");
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    auto split = validation_split(samples, seed);
    if (split.size() != 19 * 3) return fail("split size " + std::to_string(split.size()));
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& s : split) {
      if (!seen.emplace(s["scene_id"].get<std::string>(), s["metadata"]["template_id"].get<std::string>()).second) return fail("duplicate pair");
    }
    if (validation_split(samples, seed) != split) return fail("not deterministic");
  }
  return {true, "57 samples, one per (template, scene), stable under seed"};
}

// --- service durability ------------------------------------------------------

struct ServeProcess {
  pid_t pid = -1;
  int port = -1;

  static ServeProcess start(const fs::path& data_dir) {
    int fds[2];
    if (::pipe(fds) != 0) return {};
    pid_t pid = ::fork();
    if (pid == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[0]);
      ::close(fds[1]);
      std::string dir = data_dir.string();
      ::execl(CRS_CLI_PATH, CRS_CLI_PATH, "serve", "--port", "0", "--snapshot-interval", "7", "--data-dir",
              dir.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    std::string line;
    char ch;
    while (::read(fds[0], &ch, 1) == 1 && ch != '\n') line += ch;
    ::close(fds[0]);
    ServeProcess p;
    p.pid = pid;
    auto colon = line.rfind(':');
    if (colon != std::string::npos) p.port = std::atoi(line.c_str() + colon + 1);
    return p;
  }

  void kill_now() {
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      pid = -1;
    }
  }

  void stop() {
    if (pid > 0) {
      ::kill(pid, SIGTERM);
      ::waitpid(pid, nullptr, 0);
      pid = -1;
    }
  }
};

std::vector<json> durability_burst() {
  std::vector<json> out;
  const std::vector<std::string> lanes = {"Lane-1", "Lane-2", "Lane-3", "Lane-4"};
  for (int i = 0; i < 100; ++i) {
    const std::string lane = lanes[i % 4];
    switch (i % 6) {
      case 0:
        out.push_back({{"kind", "set_property"}, {"node", "Truck-1"}, {"key", "color"}, {"value", "shade " + std::to_string(i)}});
        break;
      case 1:
        out.push_back({{"kind", "set_property"}, {"node", lane}, {"key", "speed_limit"}, {"value", std::to_string(30 + i)},
                       {"locked", false}, {"frames", {1, 2}}});
        break;
      case 2:
        out.push_back({{"kind", "add_edge"}, {"source", "Truck-1"}, {"target", lane}, {"label", "is near"},
                       {"temporal", true}, {"frame", i % 4}});
        break;
      case 3:
        out.push_back({{"kind", "set_completeness"}, {"frame", i % 4}, {"type", "lane"}, {"complete", i % 12 == 3}});
        break;
      case 4:
        out.push_back({{"kind", "set_marker"}, {"node", "Sign-1"}, {"frame", i % 4}, {"camera", "LEFT"},
                       {"point", {100 + i, 200 + i}}});
        break;
      default:
        out.push_back({{"kind", "propagate_property"}, {"node", lane}, {"key", "speed_limit"}, {"direction", "forward"},
                       {"frames", {2, 3}}});
        break;
    }
  }
  return out;
}

bool create_scene(int port) {
  httplib::Client cli("127.0.0.1", port);
  json body{{"graph", graph_to_json(oracle::load_fixture("bus_lane.json"))}};
  auto r = cli.Post("/scenes", body.dump(), "application/json");
  return r && r->status == 201;
}

// Sends burst[from..] with matching revisions; stops at the first transport
// failure and returns how many commands were acknowledged.
int send_commands(int port, const std::vector<json>& burst, int from, std::string* error) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(2);
  cli.set_read_timeout(5);
  int acked = 0;
  for (int i = from; i < static_cast<int>(burst.size()); ++i) {
    json cmd = burst[i];
    cmd["revision"] = i;
    auto r = cli.Post("/scenes/bus_lane/commands", cmd.dump(), "application/json");
    if (!r) break;
    if (r->status != 200) {
      if (error) *error = "command " + std::to_string(i) + ": " + r->body;
      break;
    }
    ++acked;
  }
  return acked;
}

std::string export_of(int port) {
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Get("/scenes/bus_lane/export");
  return r && r->status == 200 ? r->body : std::string();
}

int revision_of(int port, std::string* error) {
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Get("/scenes");
  if (!r || r->status != 200) {
    *error = r ? r->body : "no response on port " + std::to_string(port);
    return -1;
  }
  auto listing = json::parse(r->body);
  for (const auto& s : listing["scenes"]) {
    if (s["scene_id"] == "bus_lane") return s["revision"];
  }
  *error = r->body;
  return -1;
}

Verdict service_durability() {
  auto burst = durability_burst();
  auto clean_dir = scratch_dir("clean");
  auto crash_dir = scratch_dir("crash");
  auto cleanup = [&] {
    fs::remove_all(clean_dir);
    fs::remove_all(crash_dir);
  };

  auto ref = ServeProcess::start(clean_dir);
  if (ref.port <= 0 || !create_scene(ref.port)) {
    ref.stop();
    cleanup();
    return fail("reference service did not start");
  }
  std::string error;
  int done = send_commands(ref.port, burst, 0, &error);
  std::string expected = export_of(ref.port);
  ref.stop();
  if (done != 100) {
    cleanup();
    return fail("reference run applied " + std::to_string(done) + "/100; " + error);
  }

  auto victim = ServeProcess::start(crash_dir);
  if (victim.port <= 0 || !create_scene(victim.port)) {
    victim.kill_now();
    cleanup();
    return fail("service did not start");
  }
  std::atomic<int> acked{0};
  std::thread client([&] {
    httplib::Client cli("127.0.0.1", victim.port);
    cli.set_read_timeout(5);
    for (int i = 0; i < 100; ++i) {
      json cmd = burst[i];
      cmd["revision"] = i;
      auto r = cli.Post("/scenes/bus_lane/commands", cmd.dump(), "application/json");
      if (!r || r->status != 200) return;
      acked = i + 1;
    }
  });
  while (acked < 50) std::this_thread::sleep_for(std::chrono::microseconds(50));
  victim.kill_now();
  client.join();
  int at_kill = acked;
  if (at_kill >= 100) {
    cleanup();
    return fail("burst finished before the kill");
  }

  auto revived = ServeProcess::start(crash_dir);
  int rev = revived.port > 0 ? revision_of(revived.port, &error) : -1;
  if (rev < at_kill || rev > 100) {
    revived.kill_now();
    cleanup();
    return fail("revision after restart " + std::to_string(rev) + " (acknowledged " + std::to_string(at_kill) +
                "); " + error);
  }
  int resumed = send_commands(revived.port, burst, rev, &error);
  std::string got = export_of(revived.port);
  revived.stop();
  cleanup();
  if (rev + resumed != 100) return fail("resume stopped at " + std::to_string(rev + resumed) + "; " + error);
  if (got.empty() || got != expected) return fail("export differs from the uninterrupted run");
  return {true, "killed after " + std::to_string(at_kill) + " acknowledged edits; replayed to revision " +
                    std::to_string(rev) + "; exports identical"};
}

Verdict canonical_validator() {
  std::string out;
  int code = run_cli("validate --format json " + quote(oracle::fixture("corrupted")), &out);
  if (code != 2) return fail("corrupted corpus exit code " + std::to_string(code));
  std::set<std::tuple<std::string, std::string, std::string>> flagged;
  auto report = json::parse(out);
  for (const auto& scene : report["scenes"]) {
    for (const auto& v : scene["canonical"]) flagged.emplace(scene["scene_id"].get<std::string>(), v["operator"].get<std::string>(), v["element"].get<std::string>());
  }
  auto manifest = json::parse(oracle::read_file(oracle::fixture("corrupted_manifest.json")));
  std::size_t seeded = 0, missed = 0;
  for (const auto& v : manifest["violations"]) {
    ++seeded;
    if (!flagged.count({v["scene_id"].get<std::string>(), v["operator"].get<std::string>(), v["element"].get<std::string>()})) ++missed;
  }
  if (missed) return fail(std::to_string(missed) + " of " + std::to_string(seeded) + " seeded violations missed");

  std::size_t clean_flags = 0;
  for (const char* input : {"scenes", "bus_lane.json", "cyclic.json", "five_frames.json"}) {
    code = run_cli("validate --format json " + quote(oracle::fixture(input)), &out);
    auto clean = json::parse(out);
    for (const auto& scene : clean["scenes"]) clean_flags += scene["canonical"].size();
    if (code != 0) return fail(std::string(input) + " exit code " + std::to_string(code));
  }
  if (clean_flags) return fail(std::to_string(clean_flags) + " flags on the clean corpus");
  return {true, std::to_string(seeded) + " seeded violations flagged; clean corpus has 0 flags"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"uniqueness oracle", uniqueness_oracle},
      {"descriptor enumeration equivalence", enumerator_equivalence},
      {"worked example", worked_example},
      {"determinism", determinism},
      {"decoy contract", decoy_contract},
      {"completeness gating", completeness_gating},
      {"reasoning depth and buckets", depth_bucketing},
      {"stats format", stats_format},
      {"validation split", validation_split_check},
      {"service durability", service_durability},
      {"canonical validator", canonical_validator},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
