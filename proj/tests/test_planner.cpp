#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "agentplan/planner.hpp"
#include "agentplan/workload_gen.hpp"
#include "support.hpp"

using namespace agentplan;
using agentplan::testing::chain_of;
using agentplan::testing::Fixture;

namespace {

const ObjectiveSet kLme{Dim::Latency, Dim::Monetary, Dim::Error};

std::vector<std::vector<double>> means_of(const ParetoFrontier& f) {
  std::vector<std::vector<double>> out;
  for (const auto& e : f.entries) {
    std::vector<double> v;
    for (auto d : f.objectives.dims()) v.push_back(e.cost.m(d));
    out.push_back(v);
  }
  return out;
}

void expect_same_frontier(const ParetoFrontier& a, const ParetoFrontier& b) {
  auto ma = means_of(a), mb = means_of(b);
  ASSERT_EQ(ma.size(), mb.size());
  for (std::size_t i = 0; i < ma.size(); ++i)
    for (std::size_t k = 0; k < ma[i].size(); ++k) EXPECT_NEAR(ma[i][k], mb[i][k], 1e-9);
}

CostDistribution point(double l, double m, double e) {
  CostDistribution c;
  c.m(Dim::Latency) = l;
  c.m(Dim::Monetary) = m;
  c.m(Dim::Error) = e;
  return c;
}

FrontierEntry entry(double l, double m, double e, std::uint64_t hash) {
  FrontierEntry f;
  f.cost = point(l, m, e);
  f.hash = hash;
  return f;
}

ParetoFrontier frontier_of(std::vector<FrontierEntry> entries) {
  auto f = pareto_filter(std::move(entries), kLme);
  f.source_label = StructureLabel::Chain;
  return f;
}

} // namespace

TEST(Planner, DominanceBasics) {
  std::vector<double> a{1, 2}, b{1, 3}, c{0, 4};
  EXPECT_TRUE(dominates(a, b));
  EXPECT_FALSE(dominates(b, a));
  EXPECT_FALSE(dominates(a, a));
  EXPECT_FALSE(dominates(a, c));
  EXPECT_FALSE(dominates(c, a));
  std::vector<double> close{1 + 1e-12, 2};
  EXPECT_FALSE(dominates(a, close));
  EXPECT_FALSE(dominates(close, a));
  // Only objectives in the set count.
  auto u = point(1, 5, 0), v = point(2, 1, 0);
  EXPECT_TRUE(dominates(u, v, ObjectiveSet{Dim::Latency}));
  EXPECT_FALSE(dominates(u, v, kLme));
}

TEST(Planner, NondominatedMatchesPairwise) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> coarse(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dims = 1 + trial % 4;
    std::vector<std::vector<double>> pts(1 + trial % 60, std::vector<double>(dims));
    for (auto& p : pts)
      for (auto& x : p) x = coarse(rng);
    std::vector<std::size_t> ref;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      bool dom = false;
      for (std::size_t j = 0; j < pts.size() && !dom; ++j) dom = dominates(pts[j], pts[i]);
      if (!dom) ref.push_back(i);
    }
    EXPECT_EQ(nondominated(pts), ref);
  }
}

TEST(Planner, FrontierOrderTiesAndDigest) {
  auto f = pareto_filter({entry(2, 1, 0, 5), entry(1, 2, 0, 9), entry(1, 2, 0, 3), entry(3, 3, 0, 1)}, kLme);
  ASSERT_EQ(f.size(), 3U);  // pareto_filter keeps cost ties
  EXPECT_EQ(f.entries[0].hash, 3U);
  EXPECT_EQ(f.entries[1].hash, 9U);
  EXPECT_EQ(f.entries[2].hash, 5U);
  EXPECT_EQ(f.find(9), &f.entries[1]);
  EXPECT_EQ(f.find(1), nullptr);
  auto g = pareto_filter({entry(1, 2, 0, 3), entry(2, 1, 0, 5), entry(1, 2, 0, 9)}, kLme);
  EXPECT_EQ(f.digest(), g.digest());
}

TEST(Planner, FixtureOptimizeMatchesBruteForce) {
  const auto& f = Fixture::get();
  PlanningInputs in{f.registry, f.pools, nullptr};
  auto opt = optimize(f.workflow, kLme, in);
  auto bf = brute_force(f.workflow, kLme, in);
  expect_same_frontier(opt, bf);
  EXPECT_EQ(opt.digest(), bf.digest());
  EXPECT_EQ(opt.source_label, StructureLabel::FeedbackGraph);
  for (std::size_t i = 1; i < opt.size(); ++i)
    EXPECT_FALSE(dominates(opt.entries[i - 1].cost, opt.entries[i].cost, kLme));
}

TEST(Planner, OptimizeMatchesBruteForceOnGeneratedWorkflows) {
  const auto registry = generator_registry();
  const auto pools = generator_pools();
  PlanningInputs in{registry, pools, nullptr};
  PlannerOptions opts;
  opts.max_variants = 4;
  std::size_t checked = 0;
  for (const auto& w : generate(80, WorkloadProfile::defaults(), 4242)) {
    if (excluded_from_optimization(w)) continue;
    auto variants = rewrite_variants(w, registry, opts.max_variants);
    if (space_size(variants, registry, pools).count > 20000) continue;
    for (const auto& o : {kLme, ObjectiveSet::all(), ObjectiveSet{Dim::Latency, Dim::Energy}}) {
      auto a = optimize(w, o, in, opts);
      auto b = brute_force(w, o, in, opts);
      expect_same_frontier(a, b);
    }
    ++checked;
  }
  EXPECT_GE(checked, 20U);
}

TEST(Planner, BruteForceRefusesLargeSpaces) {
  const auto& f = Fixture::get();
  PlannerOptions opts;
  opts.brute_force_limit = 100;
  EXPECT_THROW(brute_force(f.workflow, kLme, {f.registry, f.pools, nullptr}, opts), SpaceTooLarge);
}

TEST(Planner, UnsatisfiableAgentIsNamed) {
  const auto& f = Fixture::get();
  Pools engines_only({}, std::vector<EngineProfile>(f.pools.engines().begin(), f.pools.engines().end()));
  try {
    optimize(f.workflow, kLme, {f.registry, engines_only, nullptr});
    FAIL() << "expected a planning fault";
  } catch (const PlanningFault& e) {
    EXPECT_NE(std::string(e.what()).find("A1"), std::string::npos) << e.what();
  }
}

TEST(Planner, TruncationKeepsExtremes) {
  const auto& f = Fixture::get();
  PlannerOptions opts;
  auto full = optimize(f.workflow, kLme, {f.registry, f.pools, nullptr}, opts);
  ASSERT_GT(full.size(), 4U);
  opts.max_frontier = 4;
  auto cut = optimize(f.workflow, kLme, {f.registry, f.pools, nullptr}, opts);
  EXPECT_EQ(cut.size(), 4U);
  EXPECT_EQ(cut.truncated, full.size() - 4);
  for (auto d : kLme.dims()) {
    double best_full = 1e300, best_cut = 1e300;
    for (const auto& e : full.entries) best_full = std::min(best_full, e.cost.m(d));
    for (const auto& e : cut.entries) best_cut = std::min(best_cut, e.cost.m(d));
    EXPECT_DOUBLE_EQ(best_full, best_cut) << dim_name(d);
  }
}

TEST(Planner, PlanCacheDoesNotChangeResults) {
  const auto& f = Fixture::get();
  MMCache cache;
  PlannerOptions opts;
  opts.cache = &cache;
  PlanningInputs in{f.registry, f.pools, nullptr};
  auto plain = optimize(f.workflow, kLme, in);
  auto first = optimize(f.workflow, kLme, in, opts);
  auto second = optimize(f.workflow, kLme, in, opts);
  EXPECT_EQ(plain.digest(), first.digest());
  EXPECT_EQ(plain.digest(), second.digest());
  EXPECT_GT(cache.stats().plan.hits, 0U);
}

TEST(Planner, PolicyParsingRoundTrip) {
  for (const char* text : {"weighted:latency=0.5,monetary=0.5", "lexicographic:error,latency",
                           "constrained:monetary<=2,min=latency", "weighted:latency=1,lambda=2"}) {
    auto p = SelectionPolicy::parse(text);
    EXPECT_EQ(SelectionPolicy::parse(p.to_string()).to_string(), p.to_string()) << text;
  }
  EXPECT_EQ(SelectionPolicy::parse("lex:latency").kind, SelectionPolicy::Kind::Lexicographic);
  EXPECT_THROW(SelectionPolicy::parse("weighted"), std::invalid_argument);
  EXPECT_THROW(SelectionPolicy::parse("fastest:latency"), std::invalid_argument);
  EXPECT_THROW(SelectionPolicy::parse("constrained:monetary<=2"), std::invalid_argument);
  EXPECT_THROW(SelectionPolicy::parse("weighted:latency=x"), std::invalid_argument);
  EXPECT_THROW(SelectionPolicy::parse("weighted:latency=0.7").check(kLme), std::invalid_argument);
  EXPECT_THROW(SelectionPolicy::parse("lexicographic:energy").check(kLme), std::invalid_argument);
  EXPECT_NO_THROW(SelectionPolicy::balanced(kLme).check(kLme));
}

TEST(Planner, SelectionPolicies) {
  auto f = frontier_of({entry(1, 10, 0.3, 1), entry(5, 5, 0.2, 2), entry(10, 1, 0.1, 3)});
  EXPECT_EQ(select(f, SelectionPolicy::lexicographic({Dim::Latency})).hash, 1U);
  EXPECT_EQ(select(f, SelectionPolicy::lexicographic({Dim::Error})).hash, 3U);
  EXPECT_EQ(select(f, SelectionPolicy::weighted({{Dim::Latency, 0.5}, {Dim::Monetary, 0.5}})).hash, 2U);
  EXPECT_EQ(select(f, SelectionPolicy::balanced(kLme)).hash, 3U);
  EXPECT_EQ(select(f, SelectionPolicy::constrained({{Dim::Monetary, 6}}, Dim::Latency)).hash, 2U);
  try {
    select(f, SelectionPolicy::constrained({{Dim::Monetary, 0.5}}, Dim::Latency));
    FAIL();
  } catch (const InfeasibleConstraints& e) {
    EXPECT_NE(std::string(e.what()).find("nearest"), std::string::npos);
  }
  EXPECT_THROW(select(ParetoFrontier{}, SelectionPolicy::balanced(kLme)), PlanningFault);

  // Robust scoring penalizes the spread of the fast plan.
  auto g = frontier_of({entry(1, 10, 0.3, 1), entry(2, 9, 0.3, 2)});
  g.entries[0].cost.v(Dim::Latency) = 100;
  auto robust = SelectionPolicy::lexicographic({Dim::Latency});
  robust.robust_lambda = 1.0;
  EXPECT_EQ(select(g, robust).hash, 2U);
}

TEST(Planner, CompareUnderPolicy) {
  auto lex = SelectionPolicy::lexicographic({Dim::Latency, Dim::Monetary});
  EXPECT_LT(compare_under_policy(point(1, 9, 0), point(2, 1, 0), lex, {}), 0);
  EXPECT_GT(compare_under_policy(point(1, 9, 0), point(1, 1, 0), lex, {}), 0);
  EXPECT_EQ(compare_under_policy(point(1, 1, 0), point(1, 1, 0), lex, {}), 0);
  auto cons = SelectionPolicy::constrained({{Dim::Monetary, 5}}, Dim::Latency);
  EXPECT_LT(compare_under_policy(point(9, 4, 0), point(1, 6, 0), cons, {}), 0);
}

TEST(Planner, PolicyCacheHitsOnUnchangedFrontier) {
  MMCache cache;
  auto f = frontier_of({entry(1, 10, 0.3, 1), entry(5, 5, 0.2, 2)});
  auto p = SelectionPolicy::lexicographic({Dim::Monetary});
  EXPECT_EQ(select(f, p, &cache).hash, 2U);
  EXPECT_EQ(select(f, p, &cache).hash, 2U);
  EXPECT_EQ(cache.stats().policy.hits, 1U);

  auto changed = frontier_of({entry(1, 10, 0.3, 1), entry(6, 4, 0.2, 7)});
  EXPECT_EQ(select(changed, p, &cache).hash, 7U);
  EXPECT_EQ(cache.stats().policy.stale, 1U);
}

TEST(Planner, ReoptimizeKeepsDonePrefix) {
  const auto& f = Fixture::get();
  PlanningInputs in{f.registry, f.pools, nullptr};
  auto front = optimize(f.workflow, kLme, in);
  const auto& plan = select(front, SelectionPolicy::lexicographic({Dim::Latency})).plan;

  auto same = reoptimize(plan, {}, {}, kLme, in);
  EXPECT_EQ(same.digest(), optimize(plan.base, kLme, in).digest());

  std::set<std::string> done{"A1", "A2", "A3"};
  auto suffix = reoptimize(plan, done, {}, kLme, in);
  ASSERT_FALSE(suffix.empty());
  for (const auto& e : suffix.entries) {
    EXPECT_EQ(canonical_hash(e.plan.base), canonical_hash(plan.base));
    for (const auto& n : done) EXPECT_EQ(e.plan.bindings.at(n), plan.bindings.at(n));
  }
  EXPECT_THROW(reoptimize(plan, {"A3"}, {}, kLme, in), PlanningFault);
}

TEST(Planner, FixtureFrontierMatchesIndependentOracle) {
  // Frozen output of tools/fixture_oracle.py.
  const auto golden = io::read_json(agentplan::testing::golden_path("support_triage_frontier.json"));
  const auto& f = Fixture::get();
  auto front = optimize(f.workflow, kLme, {f.registry, f.pools, nullptr});
  const auto& points = golden.at("frontier");
  ASSERT_EQ(front.size(), points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    EXPECT_NEAR(front.entries[i].cost.m(Dim::Latency), points[i][0].get<double>(), 1e-9) << i;
    EXPECT_NEAR(front.entries[i].cost.m(Dim::Monetary), points[i][1].get<double>(), 1e-9) << i;
    EXPECT_NEAR(front.entries[i].cost.m(Dim::Error), points[i][2].get<double>(), 1e-9) << i;
  }
}
