#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccvqa/cli.hpp"
#include "ccvqa/util.hpp"

using namespace ccvqa;
namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(CCVQA_SOURCE_DIR) + "/data/scenarios/";

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ccvqa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = app::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> scenario_args(const std::string& sub) {
  return {sub,
          "--stub",
          "--kb", kData + "kb.jsonl",
          "--queries", kData + "queries.jsonl",
          "--gt", kData + "gt.jsonl",
          "--bundle", kData + "stub.json",
          "--lm", "scenario"};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ccvqa_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2", "[cli]") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"eval", "--mode", "rag", "--queries", "/nonexistent.jsonl"}).code == 2);
  auto args = scenario_args("eval");
  args[3] = "/nonexistent/kb.jsonl";
  const auto r = run(args);
  CHECK(r.code == 2);
  CHECK(r.err.find("knowledge base not found") != std::string::npos);
  auto bad_mode = scenario_args("eval");
  bad_mode.insert(bad_mode.end(), {"--mode", "vanilla"});
  CHECK(run(bad_mode).code == 2);
  auto bad_tau = scenario_args("eval");
  bad_tau.insert(bad_tau.end(), {"--tau", "2"});
  CHECK(run(bad_tau).code == 2);
}

TEST_CASE("help exits cleanly", "[cli]") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("ablate") != std::string::npos);
}

TEST_CASE("retrieve writes one line per query", "[cli]") {
  const auto r = run(scenario_args("retrieve"));
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["contexts"].size() == 3);
    ++n;
  }
  CHECK(n == 10);
}

TEST_CASE("answer with a trace dump", "[cli]") {
  const auto dir = scratch("answer");
  auto args = scenario_args("answer");
  args.insert(args.end(), {"--dump-trace", (dir / "trace.jsonl").string(), "--no-cad"});
  const auto r = run(args);
  REQUIRE(r.code == 0);
  const auto first = nlohmann::json::parse(r.out.substr(0, r.out.find('\n')));
  CHECK(first["qid"] == "s01");
  const std::string trace = read_file((dir / "trace.jsonl").string());
  const auto step = nlohmann::json::parse(trace.substr(0, trace.find('\n')));
  CHECK(step["s_prime"].is_null());
  CHECK(step["qid"] == "s01");
}

TEST_CASE("eval reports are reproducible and echo their config", "[cli]") {
  const auto dir = scratch("eval");
  auto args = scenario_args("eval");
  args.insert(args.end(), {"--out", (dir / "a").string()});
  const auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.starts_with("ccvqa n=10 accuracy=1 "));
  const std::string a = read_file((dir / "a/report.json").string());
  const std::string records = read_file((dir / "a/records.jsonl").string());
  REQUIRE(run(args).code == 0);
  CHECK(read_file((dir / "a/report.json").string()) == a);
  CHECK(read_file((dir / "a/records.jsonl").string()) == records);

  const auto report = nlohmann::json::parse(a);
  CHECK(report["accuracy"] == 1.0);
  CHECK(report["base_accuracy"] == 0.4);
  CHECK(report["metric_note"].is_string());
  write_file((dir / "echo.json").string(), report["config"].dump());
  const auto again = run({"eval", "--config", (dir / "echo.json").string()});
  REQUIRE(again.code == 0);
  CHECK(read_file((dir / "a/report.json").string()) == a);
}

TEST_CASE("base mode eval", "[cli]") {
  const auto dir = scratch("base");
  auto args = scenario_args("eval");
  args.insert(args.end(), {"--mode", "base", "--out", dir.string()});
  const auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(read_file((dir / "report.json").string()))["accuracy"] == 0.4);
}

TEST_CASE("ablation writes one report per grid point", "[cli]") {
  const auto dir = scratch("ablate");
  auto args = scenario_args("ablate");
  args.insert(args.end(), {"--out", dir.string()});
  const auto r = run(args);
  REQUIRE(r.code == 0);
  std::size_t reports = 0;
  for (const auto& e : fs::directory_iterator(dir / "reports")) {
    const auto j = nlohmann::json::parse(read_file(e.path().string()));
    CHECK(j.contains("accuracy"));
    ++reports;
  }
  CHECK(reports == 13);
  CHECK(fs::exists(dir / "reports" / "components_VCCR_CAD_CPE.json"));
  CHECK(fs::exists(dir / "ablation.csv"));

  auto bad = scenario_args("ablate");
  bad.insert(bad.end(), {"--grid", "beta", "--out", dir.string()});
  CHECK(run(bad).code == 2);
}

TEST_CASE("stats writes a histogram", "[cli]") {
  const auto dir = scratch("stats");
  auto args = scenario_args("stats");
  args.insert(args.end(), {"--out", dir.string()});
  const auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(read_file((dir / "histogram.csv").string()).starts_with("bin_left,bin_right,count\n"));
  const auto j = nlohmann::json::parse(read_file((dir / "stats.json").string()));
  CHECK(j["sentences"].get<int>() > 0);
}

TEST_CASE("interrupt flag stops an eval with 130", "[cli]") {
  const auto dir = scratch("interrupt");
  auto args = scenario_args("eval");
  args.insert(args.end(), {"--out", dir.string()});
  app::interrupt_flag() = true;
  const auto r = run(args);
  app::interrupt_flag() = false;
  CHECK(r.code == 130);
}
