#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "agentplan/error.hpp"
#include "agentplan/workflow.hpp"
#include "agentplan/workload_gen.hpp"
#include "support.hpp"

using namespace agentplan;
using agentplan::testing::chain_of;
using agentplan::testing::Fixture;

namespace {

const Registry& gen_registry() {
  static const Registry r = generator_registry();
  return r;
}

std::string det(const std::string& task) { return task + "/relational"; }

} // namespace

TEST(Workflow, FixtureValidates) {
  const auto& f = Fixture::get();
  auto report = validate(f.workflow, f.registry);
  EXPECT_TRUE(report.ok()) << report.to_string();
  EXPECT_EQ(classify_structure(f.workflow), StructureLabel::FeedbackGraph);
}

TEST(Workflow, FixtureLayersIgnoreFeedback) {
  const auto& f = Fixture::get();
  auto layers = topo_order(f.workflow);
  ASSERT_EQ(layers.size(), 10U);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    ASSERT_EQ(layers[i].size(), 1U);
    EXPECT_EQ(layers[i][0], "A" + std::to_string(i + 1));
  }
}

TEST(Workflow, CyclicFileIsRejected) {
  const auto& f = Fixture::get();
  auto w = io::load_workflow(agentplan::testing::data_path("workflows/cyclic_invalid.json"));
  auto report = validate(w, f.registry);
  EXPECT_TRUE(report.has(Violation::Kind::Cycle));
  EXPECT_NE(report.to_string().find("cycle"), std::string::npos);
  EXPECT_THROW(topo_order(w), InvalidWorkflow);
  EXPECT_THROW(classify_structure(w), InvalidWorkflow);
}

TEST(Workflow, Violations) {
  const auto& f = Fixture::get();
  AbstractWorkflow empty;
  EXPECT_TRUE(validate(empty, f.registry).has(Violation::Kind::Empty));

  auto w = chain_of({"A2", "A3", "A99"});
  EXPECT_TRUE(validate(w, f.registry).has(Violation::Kind::UnknownAgent));

  w = chain_of({"A2", "A3"});
  w.edges.push_back({"A3", "A7", EdgeKind::Data, false});
  EXPECT_TRUE(validate(w, f.registry).has(Violation::Kind::DanglingEdge));

  w = chain_of({"A2", "A3", "A3"});
  EXPECT_TRUE(validate(w, f.registry).has(Violation::Kind::DuplicateNode));

  // raw-transcripts does not feed an agent expecting enriched-records.
  w = chain_of({"A2", "A6"});
  EXPECT_TRUE(validate(w, f.registry).has(Violation::Kind::RoleMismatch));
  w.edges[0].adapter = true;
  EXPECT_TRUE(validate(w, f.registry).ok());

  w = chain_of({"A2", "A3"});
  w.workloads["A5"] = {};
  EXPECT_TRUE(validate(w, f.registry).has(Violation::Kind::UnknownWorkload));
}

TEST(Workflow, Classification) {
  const auto& r = gen_registry();
  auto a = det("data-ingestion"), b = det("connect-sources"), c = det("filtering"), d = det("deduplication"),
       e = det("schema-mapping");

  auto chain = chain_of({a, b, c});
  EXPECT_EQ(classify_structure(chain), StructureLabel::Chain);
  EXPECT_TRUE(validate(chain, r).ok());

  AbstractWorkflow branching = chain_of({a, b, c});
  branching.nodes.push_back(d);
  branching.edges.push_back({b, d, EdgeKind::Data, false});
  EXPECT_EQ(classify_structure(branching), StructureLabel::BranchingChain);

  AbstractWorkflow tree;
  tree.nodes = {a, b, c, d, e};
  tree.edges = {{a, b}, {a, c}, {b, d}, {b, e}};
  EXPECT_EQ(classify_structure(tree), StructureLabel::Tree);

  AbstractWorkflow dag;
  dag.nodes = {a, b, c, d};
  dag.edges = {{a, b}, {a, c}, {b, d}, {c, d}};
  EXPECT_EQ(classify_structure(dag), StructureLabel::Dag);

  AbstractWorkflow hub;
  hub.nodes = {"orchestrator", a, b, c};
  hub.edges = {{"orchestrator", a}, {"orchestrator", b}, {"orchestrator", c}, {a, b}};
  EXPECT_EQ(classify_structure(hub), StructureLabel::OrchestratedDag);

  auto fb = chain_of({a, b, c});
  fb.edges.push_back({c, a, EdgeKind::Feedback, false});
  EXPECT_EQ(classify_structure(fb), StructureLabel::FeedbackGraph);
  EXPECT_EQ(topo_order(fb).size(), 3U);

  auto tagged = chain_of({a, b, c});
  tagged.tag = StructureLabel::PubSub;
  EXPECT_EQ(classify_structure(tagged), StructureLabel::PubSub);
  tagged.tag = StructureLabel::Tree;  // not a tag-only label
  EXPECT_EQ(classify_structure(tagged), StructureLabel::Chain);
}

TEST(Workflow, LayersRespectEdgesOnGeneratedWorkflows) {
  auto workflows = generate(300, WorkloadProfile::defaults(), 11);
  for (const auto& w : workflows) {
    auto layers = topo_order(w);
    std::map<std::string, std::size_t> depth;
    std::size_t count = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      EXPECT_TRUE(std::is_sorted(layers[l].begin(), layers[l].end()));
      for (const auto& n : layers[l]) depth[n] = l;
      count += layers[l].size();
    }
    EXPECT_EQ(count, w.nodes.size());
    for (const auto& e : w.edges)
      if (e.kind == EdgeKind::Data) {
        EXPECT_LT(depth.at(e.from), depth.at(e.to)) << w.name;
      }
  }
}

TEST(Workflow, CanonicalHashIgnoresOrderAndName) {
  auto w = chain_of({"A2", "A3", "A5"});
  auto v = w;
  v.name = "other";
  std::reverse(v.nodes.begin(), v.nodes.end());
  std::reverse(v.edges.begin(), v.edges.end());
  v.workloads["A2"] = {1.0, 2.0, 3.0};
  EXPECT_EQ(canonical_hash(w), canonical_hash(v));
  v.edges.pop_back();
  EXPECT_NE(canonical_hash(w), canonical_hash(v));
}

TEST(Workflow, FixtureRewritesParallelizeA4A5) {
  const auto& f = Fixture::get();
  auto dropped = ordering_only_edges(f.workflow, f.registry);
  ASSERT_FALSE(dropped.empty());
  EXPECT_TRUE(std::any_of(dropped.begin(), dropped.end(),
                          [](const Edge& e) { return e.from == "A4" && e.to == "A5"; }));

  auto variants = rewrite_variants(f.workflow, f.registry, 8);
  ASSERT_GE(variants.size(), 2U);
  EXPECT_EQ(canonical_hash(variants.front()), canonical_hash(f.workflow));
  bool parallel = false;
  const auto original = data_closure(f.workflow);
  for (const auto& v : variants) {
    EXPECT_TRUE(validate(v, f.registry).ok());
    for (const auto& layer : topo_order(v))
      if (std::find(layer.begin(), layer.end(), "A4") != layer.end() &&
          std::find(layer.begin(), layer.end(), "A5") != layer.end())
        parallel = true;
    // Rewrites never invent a dependency between original nodes that was not
    // implied before.
    for (const auto& dep : data_closure(v))
      if (std::find(f.workflow.nodes.begin(), f.workflow.nodes.end(), dep.first) != f.workflow.nodes.end()) {
        EXPECT_TRUE(original.contains(dep)) << dep.first << "->" << dep.second;
      }
  }
  EXPECT_TRUE(parallel);
  EXPECT_EQ(rewrite_variants(f.workflow, f.registry, 1).size(), 1U);
}

TEST(Workflow, ExecutableValidation) {
  const auto& f = Fixture::get();
  auto w = chain_of({"A2", "A3"});
  auto ew = make_executable(w, {{"A2", {"A2", std::nullopt, "streamsets"}}});
  EXPECT_TRUE(validate_executable(ew, f.registry).has(Violation::Kind::MissingBinding));
  ew.bindings["A3"] = {"A3", std::nullopt, "streamsets"};
  EXPECT_TRUE(validate_executable(ew, f.registry).ok());
  auto other = ew;
  other.bindings["A3"].engine = "duckdb";
  EXPECT_NE(plan_hash(ew), plan_hash(other));
}
