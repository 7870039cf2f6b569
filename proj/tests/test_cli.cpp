#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "agentplan/cli.hpp"
#include "support.hpp"

using namespace agentplan;
using agentplan::testing::data_path;
using agentplan::testing::scratch_dir;

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "agentplan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::vector<std::string> inputs() {
  return {"--registry", data_path("registry.json").string(), "--models", data_path("models.json").string(),
          "--engines", data_path("engines.json").string(), "--workflow",
          data_path("workflows/support_triage.json").string()};
}

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& more) {
  base.insert(base.end(), more.begin(), more.end());
  return base;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST(Cli, Validate) {
  auto r = cli(with({"validate"}, inputs()));
  EXPECT_EQ(r.status, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("feedback-graph"), std::string::npos);

  r = cli({"validate", "--registry", data_path("registry.json").string(), "--workflow",
           data_path("workflows/cyclic_invalid.json").string()});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("cycle"), std::string::npos);

  r = cli({"validate", "--registry", data_path("registry.json").string(), "--workflow", "/nonexistent/wf.json"});
  EXPECT_EQ(r.status, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).status, 2);
  EXPECT_EQ(cli({"frobnicate"}).status, 2);
  auto out = scratch_dir("cli-usage");
  EXPECT_EQ(cli(with(with({"optimize"}, inputs()), {"--objectives", "", "--out", out.string()})).status, 2);
  EXPECT_EQ(cli(with(with({"optimize"}, inputs()), {"--policy", "weighted:latency=2", "--out", out.string()})).status,
            2);
  EXPECT_EQ(cli(with(with({"run"}, inputs()), {"--tau", "1.5", "--out", out.string()})).status, 2);
}

TEST(Cli, OptimizeWritesFrontierAndDot) {
  auto out = scratch_dir("cli-optimize");
  auto r = cli(with(with({"optimize"}, inputs()), {"--out", out.string()}));
  ASSERT_EQ(r.status, 0) << r.err;
  auto frontier = io::read_json(out / "frontier.json");
  const auto n = frontier.at("entries").size();
  ASSERT_GT(n, 0U);
  for (std::size_t k = 0; k < n; ++k) EXPECT_TRUE(std::filesystem::exists(out / ("plan-" + std::to_string(k) + ".dot")));
  EXPECT_NE(slurp(out / "plan-0.dot").find("digraph"), std::string::npos);
  EXPECT_NE(r.out.find("latency_ms"), std::string::npos);
}

TEST(Cli, SingleBindingPoolsGiveOnePlan) {
  auto dir = scratch_dir("cli-single");
  auto models = io::read_json(data_path("models.json"));
  auto engines = io::read_json(data_path("engines.json"));
  nlohmann::json m = nlohmann::json::array(), e = nlohmann::json::array();
  for (const auto& x : models["models"])
    if (x["model_id"] == "claude-3.5-sonnet") m.push_back(x);
  for (const auto& x : engines["engines"])
    if (x["engine_id"] == "spark" || x["engine_id"] == "cloud-api") e.push_back(x);
  io::write_json(dir / "models.json", {{"models", m}});
  io::write_json(dir / "engines.json", {{"engines", e}});
  auto args = inputs();
  args[3] = (dir / "models.json").string();
  args[5] = (dir / "engines.json").string();
  auto r = cli(with(with({"optimize"}, args), {"--out", (dir / "out").string()}));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(io::read_json(dir / "out" / "frontier.json").at("entries").size(), 1U);
}

TEST(Cli, PlannerFaultNamesAgent) {
  auto dir = scratch_dir("cli-unsat");
  auto engines = io::read_json(data_path("engines.json"));
  nlohmann::json e = nlohmann::json::array();
  for (const auto& x : engines["engines"])
    if (x["engine_id"] != "streamsets" && x["engine_id"] != "spark") e.push_back(x);
  io::write_json(dir / "engines.json", {{"engines", e}});
  auto args = inputs();
  args[5] = (dir / "engines.json").string();
  auto r = cli(with(with({"optimize"}, args), {"--out", (dir / "out").string()}));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("A2"), std::string::npos) << r.err;
}

TEST(Cli, RunIsByteIdenticalForFixedSeed) {
  auto a = scratch_dir("cli-run-a"), b = scratch_dir("cli-run-b");
  auto args = with(with({"run"}, inputs()), {"--seed", "11", "--runs", "2"});
  ASSERT_EQ(cli(with(args, {"--out", a.string()})).status, 0);
  ASSERT_EQ(cli(with(args, {"--out", b.string()})).status, 0);
  const auto ta = slurp(a / "telemetry.jsonl");
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, slurp(b / "telemetry.jsonl"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST(Cli, SeedFallsBackToEnvironment) {
  auto a = scratch_dir("cli-env-a"), b = scratch_dir("cli-env-b");
  ASSERT_EQ(cli(with(with({"run"}, inputs()), {"--seed", "23", "--out", a.string()})).status, 0);
  ::setenv("AGENTPLAN_SEED", "23", 1);
  auto r = cli(with(with({"run"}, inputs()), {"--out", b.string()}));
  ::unsetenv("AGENTPLAN_SEED");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(slurp(a / "telemetry.jsonl"), slurp(b / "telemetry.jsonl"));
}

TEST(Cli, RunWithFaultSwitchesOnce) {
  auto out = scratch_dir("cli-fault");
  auto r = cli(with(with({"run"}, inputs()), {"--seed", "7", "--runs", "3", "--fault", "duckdb:3", "--policy",
                                              "lexicographic:latency,monetary,error", "--out", out.string()}));
  ASSERT_EQ(r.status, 0) << r.err;
  auto summary = io::read_json(out / "summary.json");
  EXPECT_EQ(summary.at("switches").size(), 1U);

  auto quiet = scratch_dir("cli-fault-quiet");
  r = cli(with(with({"run"}, inputs()), {"--seed", "7", "--runs", "3", "--fault", "duckdb:3", "--no-monitor",
                                         "--out", quiet.string()}));
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(slurp(quiet / "triggers.jsonl").empty());
  EXPECT_EQ(cli(with(with({"run"}, inputs()), {"--fault", "duckdb", "--out", quiet.string()})).status, 2);
  EXPECT_EQ(cli(with(with({"run"}, inputs()), {"--fault", "nosuch:3", "--out", quiet.string()})).status, 1);
}

TEST(Cli, CacheStats) {
  auto out = scratch_dir("cli-cache");
  auto r = cli(with(with({"cache-stats"}, inputs()), {"--runs", "2", "--out", out.string()}));
  ASSERT_EQ(r.status, 0) << r.err;
  auto stats = io::read_json(out / "cache_stats.json");
  EXPECT_GT(stats.at("symbolic").at("lookups").get<int>(), 0);
  EXPECT_TRUE(std::filesystem::exists(out / "cache.jsonl"));
}

TEST(Cli, Bench) {
  auto out = scratch_dir("cli-bench");
  auto r = cli({"bench", "--n", "1", "--seed", "2", "--out", out.string()});
  ASSERT_EQ(r.status, 0) << r.err;
  auto report = io::read_json(out / "bench.json");
  EXPECT_EQ(report.at("passes").at("first").at("rows").size(), 1U);
  EXPECT_TRUE(report.contains("timing"));

  io::write_json(out / "bad_profile.json", {{"deterministic_fraction", 2.0}});
  r = cli({"bench", "--n", "1", "--profile", (out / "bad_profile.json").string(), "--out", out.string()});
  EXPECT_NE(r.status, 0);
}
