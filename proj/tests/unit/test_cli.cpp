#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <random>

#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Output {
  int status = -1;
  std::string out;
};

Output run(const std::string& args) {
  std::string cmd = std::string(CRS_CLI_PATH) + " " + args + " 2>/dev/null";
  Output o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
  int raw = ::pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("help output matches the goldens") {
  CHECK(run("--help").out == oracle::read_file(fs::path(CRS_GOLDEN_DIR) / "help.txt"));
  for (const char* sub : {"ingest", "validate", "generate", "stats", "split", "report", "serve"}) {
    CAPTURE(sub);
    auto r = run(std::string(sub) + " --help");
    CHECK(r.status == 0);
    CHECK(r.out == oracle::read_file(fs::path(CRS_GOLDEN_DIR) / ("help_" + std::string(sub) + ".txt")));
  }
}

TEST_CASE("exit codes") {
  CHECK(run("validate " + q(oracle::fixture("scenes"))).status == 0);
  auto bad = run("validate " + q(oracle::fixture("corrupted")));
  CHECK(bad.status == 2);
  CHECK(bad.out.find("phi_e") != std::string::npos);
  CHECK(run("generate --window 0").status == 1);
  CHECK(run("frobnicate").status == 1);
  CHECK(run("stats /nonexistent.json").status == 2);
}

TEST_CASE("stats json through the cli") {
  auto r = run("stats --format json " + q(oracle::fixture("five_frames.json")));
  REQUIRE(r.status == 0);
  auto report = json::parse(r.out);
  CHECK(report["statistics"]["evaluated_frame_graphs"]["total"] == 2);
}

TEST_CASE("generate then split and report") {
  std::random_device rd;
  auto dir = fs::temp_directory_path() / ("crs-cli-" + std::to_string(rd()));
  fs::create_directories(dir);
  auto out = dir / "samples.jsonl";
  REQUIRE(run("generate --seed 4 --out " + q(out) + " " + q(oracle::fixture("scenes"))).status == 0);
  CHECK(fs::exists(dir / "samples.jsonl.diagnostics.json"));
  auto split = run("split --seed 2 " + q(out));
  REQUIRE(split.status == 0);
  CHECK(oracle::parse_jsonl(split.out).size() == 57);
  auto report = run("report --format json " + q(out));
  REQUIRE(report.status == 0);
  CHECK(json::parse(report.out).dump().find("sign_controls_lane") != std::string::npos);
  fs::remove_all(dir);
}
