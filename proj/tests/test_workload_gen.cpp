#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "agentplan/io.hpp"
#include "agentplan/workload_gen.hpp"

using namespace agentplan;

TEST(WorkloadGen, ProfileChecks) {
  auto p = WorkloadProfile::defaults();
  EXPECT_NO_THROW(p.check());
  auto q = p;
  q.structure_mix[0].second += 0.05;
  EXPECT_THROW(q.check(), GenerationFault);
  q = p;
  q.deterministic_fraction = 1.2;
  EXPECT_THROW(q.check(), GenerationFault);
  q = p;
  q.mode_tasks = 20;
  EXPECT_THROW(q.check(), GenerationFault);
  q = p;
  q.engine_mix[0].first = EngineClass::InferenceApi;
  EXPECT_THROW(q.check(), GenerationFault);
  q = p;
  q.inclusion.emplace_back("no-such-task", 0.5);
  EXPECT_THROW(q.check(), GenerationFault);
  EXPECT_THROW(generate(0, p, 1), GenerationFault);
}

TEST(WorkloadGen, ProfileJsonRoundTrip) {
  auto p = WorkloadProfile::defaults();
  auto back = WorkloadProfile::from_json(p.to_json());
  EXPECT_EQ(back.to_json(), p.to_json());
  auto partial = WorkloadProfile::from_json({{"deterministic_fraction", 0.5}});
  EXPECT_EQ(partial.deterministic_fraction, 0.5);
  EXPECT_EQ(partial.max_tasks, p.max_tasks);
  EXPECT_THROW(WorkloadProfile::from_json({{"structure_mix", {{"spiral", 1.0}}}}), ConfigError);
}

TEST(WorkloadGen, TriangularTaskCounts) {
  auto w = task_count_weights(WorkloadProfile::defaults());
  ASSERT_EQ(w.size(), 13U);  // 3..15
  const auto peak = std::max_element(w.begin(), w.end()) - w.begin();
  EXPECT_EQ(peak, 3);  // six tasks
  EXPECT_TRUE(std::is_sorted(w.begin(), w.begin() + 4));
  EXPECT_TRUE(std::is_sorted(w.rbegin(), w.rend() - 3));
  for (double x : w) EXPECT_GT(x, 0.0);
}

TEST(WorkloadGen, DeterministicPerSeed) {
  auto p = WorkloadProfile::defaults();
  auto a = generate(50, p, 3), b = generate(50, p, 3), c = generate(50, p, 4);
  auto dump = [](const std::vector<AbstractWorkflow>& ws) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& w : ws) j.push_back(io::to_json(w));
    return j.dump();
  };
  EXPECT_EQ(dump(a), dump(b));
  EXPECT_NE(dump(a), dump(c));
}

TEST(WorkloadGen, WorkflowsAreValidAndLabeled) {
  const auto registry = generator_registry();
  const auto pools = generator_pools();
  std::map<StructureLabel, int> seen;
  for (const auto& w : generate(600, WorkloadProfile::defaults(), 21)) {
    ASSERT_TRUE(validate(w, registry).ok()) << w.name;
    const auto label = classify_structure(w);
    ++seen[label];
    EXPECT_GE(w.nodes.size(), 3U);
    EXPECT_LE(w.nodes.size(), 15U);
    const bool feedback_style =
        label == StructureLabel::PubSub || label == StructureLabel::Cyclic || label == StructureLabel::Mesh;
    EXPECT_EQ(excluded_from_optimization(w), feedback_style) << w.name;
    for (const auto& n : w.nodes) EXPECT_FALSE(candidate_bindings(*registry.find_agent(n), pools).empty()) << n;
  }
  for (auto l : {StructureLabel::Chain, StructureLabel::Dag, StructureLabel::Tree, StructureLabel::BranchingChain,
                 StructureLabel::Hybrid})
    EXPECT_GT(seen[l], 0) << to_string(l);
}

TEST(WorkloadGen, SharedTasksFollowInclusionRates) {
  const auto ws = generate(3000, WorkloadProfile::defaults(), 8);
  std::map<std::string, int> count;
  for (const auto& w : ws)
    for (const auto& n : w.nodes) ++count[n.substr(0, n.find('/'))];
  for (const auto& [task, p] : WorkloadProfile::defaults().inclusion) {
    const double rate = static_cast<double>(count[task]) / ws.size();
    EXPECT_GE(rate, p - 0.03) << task;
  }
}

TEST(WorkloadGen, BenchSingleWorkflow) {
  const auto registry = generator_registry();
  const auto pools = generator_pools();
  std::vector<AbstractWorkflow> ws;
  for (const auto& w : generate(20, WorkloadProfile::defaults(), 5))
    if (!excluded_from_optimization(w) && ws.empty()) ws.push_back(w);
  BenchOptions opts;
  opts.seed = 5;
  auto report = bench(ws, registry, pools, opts);
  EXPECT_EQ(report.workflows, 1U);
  ASSERT_EQ(report.first.rows.size(), 1U);
  ASSERT_TRUE(report.baseline);
  EXPECT_TRUE(report.transparent);
  EXPECT_EQ(report.first.rows[0].frontier_digest, report.baseline->rows[0].frontier_digest);
  if (report.replay.rows[0].deterministic_nodes > 0) {
    EXPECT_EQ(report.replay.deterministic_hit_rate(), 1.0);
  }
  auto j = report.to_json();
  EXPECT_TRUE(j.contains("timing"));
}
