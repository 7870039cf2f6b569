// Reference computations checked against the library.

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <tuple>

#include "agentplan/mmcache.hpp"
#include "agentplan/monitor.hpp"
#include "agentplan/planner.hpp"
#include "agentplan/simulator.hpp"
#include "agentplan/workload_gen.hpp"
#include "support.hpp"

using namespace agentplan;
using agentplan::testing::chain_of;
using agentplan::testing::Fixture;

namespace {

const ObjectiveSet kLme{Dim::Latency, Dim::Monetary, Dim::Error};

ExecutableWorkflow latency_plan() {
  const auto& f = Fixture::get();
  auto front = optimize(f.workflow, kLme, {f.registry, f.pools, nullptr});
  return select(front, SelectionPolicy::lexicographic({Dim::Latency, Dim::Monetary, Dim::Error})).plan;
}

TaskSignature det_sig(int i) { return {"relational-extract", "in-" + std::to_string(i), {}, "extract rows"}; }

} // namespace

TEST(Oracles, FixtureSpaceEqualsEnumeratedPlans) {
  const auto& f = Fixture::get();
  const auto variants = rewrite_variants(f.workflow, f.registry, PlannerOptions{}.max_variants);
  std::set<std::uint64_t> plans;
  std::size_t emitted = 0;
  for (const auto& v : variants) {
    ExecutableWorkflow ew = make_executable(v, {});
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == v.nodes.size()) {
        plans.insert(plan_hash(ew));
        ++emitted;
        return;
      }
      for (const auto& b : candidate_bindings(*f.registry.find_agent(v.nodes[i]), f.pools)) {
        ew.bindings[v.nodes[i]] = b;
        rec(i + 1);
      }
    };
    rec(0);
  }
  EXPECT_EQ(plans.size(), emitted);
  EXPECT_EQ(space_size(variants, f.registry, f.pools).count, emitted);
  EXPECT_EQ(emitted, 20736U);
}

TEST(Oracles, ParallelVariantOnlyShortensLatency) {
  const auto& f = Fixture::get();
  auto front = optimize(f.workflow, kLme, {f.registry, f.pools, nullptr});
  for (const auto& e : front.entries) {
    auto chain = estimate_workflow(make_executable(f.workflow, e.plan.bindings), f.registry, f.pools);
    auto par = estimate_workflow(e.plan, f.registry, f.pools);
    EXPECT_LE(par.m(Dim::Latency), chain.m(Dim::Latency));
    for (auto d : {Dim::Monetary, Dim::Error, Dim::Tokens, Dim::Energy}) EXPECT_NEAR(par.m(d), chain.m(d), 1e-12);
  }
}

TEST(Oracles, TwoNodeChainMatchesFourPlanEnumeration) {
  const auto& f = Fixture::get();
  const auto w = chain_of({"A6", "A7"});
  ASSERT_EQ(candidate_bindings(*f.registry.find_agent("A6"), f.pools).size(), 2U);
  ASSERT_EQ(candidate_bindings(*f.registry.find_agent("A7"), f.pools).size(), 2U);
  std::vector<FrontierEntry> all;
  for (const auto& a : candidate_bindings(*f.registry.find_agent("A6"), f.pools))
    for (const auto& b : candidate_bindings(*f.registry.find_agent("A7"), f.pools)) {
      FrontierEntry e;
      e.plan = make_executable(w, {{"A6", a}, {"A7", b}});
      e.cost = estimate_workflow(e.plan, f.registry, f.pools);
      e.hash = plan_hash(e.plan);
      all.push_back(e);
    }
  ASSERT_EQ(all.size(), 4U);
  PlannerOptions opts;
  opts.collapse_ties = false;
  auto got = optimize(w, kLme, {f.registry, f.pools, nullptr}, opts);
  auto want = pareto_filter(all, kLme);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got.entries[i].hash, want.entries[i].hash);
}

TEST(Oracles, LexicographicMatchesTupleSort) {
  const auto& f = Fixture::get();
  auto front = optimize(f.workflow, kLme, {f.registry, f.pools, nullptr});
  auto order = front.entries;
  std::sort(order.begin(), order.end(), [](const FrontierEntry& a, const FrontierEntry& b) {
    return std::tuple(a.cost.m(Dim::Error), a.cost.m(Dim::Latency), a.hash) <
           std::tuple(b.cost.m(Dim::Error), b.cost.m(Dim::Latency), b.hash);
  });
  EXPECT_EQ(select(front, SelectionPolicy::lexicographic({Dim::Error, Dim::Latency})).hash, order.front().hash);
}

TEST(Oracles, SlowedSuffixNodeIsRebound) {
  const auto& f = Fixture::get();
  const auto plan = latency_plan();
  ASSERT_EQ(plan.bindings.at("A8").engine, "duckdb");
  const auto& a8 = *f.registry.find_agent("A8");
  const double est = estimate_node(a8, plan.bindings.at("A8"), workload_for(plan.base, a8), f.pools).m(Dim::Latency);
  Statistics stats;
  for (int i = 0; i < 5; ++i)
    stats.update({"run-0001", "A8", plan.bindings.at("A8"), 3.0 * est, 0.0, 0.0, 0.0, false, 0.0});
  const std::set<std::string> done{"A1", "A2", "A3", "A4", "A5", "A6", "A7"};

  // Brute force over the suffix under the updated statistics.
  std::vector<FrontierEntry> all;
  ExecutableWorkflow ew = plan;
  for (const auto& b8 : candidate_bindings(a8, f.pools))
    for (const auto& b9 : candidate_bindings(*f.registry.find_agent("A9"), f.pools))
      for (const auto& b10 : candidate_bindings(*f.registry.find_agent("A10"), f.pools)) {
        ew.bindings["A8"] = b8;
        ew.bindings["A9"] = b9;
        ew.bindings["A10"] = b10;
        FrontierEntry e;
        e.plan = ew;
        e.cost = estimate_workflow(ew, f.registry, f.pools, {&stats, nullptr, 0.0});
        e.hash = plan_hash(ew);
        all.push_back(e);
      }
  auto want = pareto_filter(all, ObjectiveSet{Dim::Latency});
  auto got = reoptimize(plan, done, {}, ObjectiveSet{Dim::Latency}, {f.registry, f.pools, &stats});
  ASSERT_FALSE(got.empty());
  EXPECT_NEAR(got.entries[0].cost.m(Dim::Latency), want.entries[0].cost.m(Dim::Latency), 1e-9);
  for (const auto& e : got.entries) {
    EXPECT_NE(e.plan.bindings.at("A8").engine, "duckdb");
    for (const auto& d : done) EXPECT_EQ(e.plan.bindings.at(d), plan.bindings.at(d));
  }
}

TEST(Oracles, RevenueQueriesCosineConstant) {
  // Six shared tokens out of seven on each side.
  const double sim = cosine(embed("show me top 10 customers by revenue"), embed("show me top 10 products by revenue"));
  EXPECT_NEAR(sim, 6.0 / 7.0, 1e-6);
}

TEST(Oracles, SemanticLookupMatchesExhaustiveScan) {
  const std::vector<std::string> words{"top",  "customers", "revenue", "by",    "show",  "list",
                                       "best", "region",    "month",   "sales", "total", "10"};
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1), len(2, 7);
  auto sentence = [&] {
    std::string s;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) s += (i ? " " : "") + words[pick(rng)];
    return s;
  };
  auto sig = [](const std::string& text) {
    return TaskSignature{"sql-generation", "warehouse", {{"entity", "customers"}}, text};
  };
  std::size_t hits = 0, checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    MMCache cache;
    std::vector<std::pair<std::string, Embedding>> stored;
    for (int i = 0; i < 30; ++i) {
      auto text = sentence();
      if (cache.put_result(sig(text), text, false)) stored.emplace_back(text, embed(text));
    }
    for (int q = 0; q < 20; ++q) {
      const auto text = sentence();
      const double tau = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
      const auto e = embed(text);
      double best = -2.0;
      for (const auto& [_, se] : stored) best = std::max(best, cosine(e, se));
      if (std::abs(best - tau) < 1e-4) continue;  // too close to call in float
      auto hit = cache.get_semantic(sig(text), tau);
      ++checked;
      EXPECT_EQ(hit.has_value(), best >= tau) << text << " tau " << tau;
      if (hit) {
        ++hits;
        EXPECT_NEAR(hit->similarity, std::min(1.0, best), 1e-5);
      }
    }
  }
  EXPECT_GT(hits, 20U);
  EXPECT_GT(checked - hits, 20U);
}

TEST(Oracles, EvictionMatchesReferencePolicy) {
  // Independent model: LRU short tier, promotion on the k-th hit, LFU long
  // tier ordered by (hits, last hit, key).
  struct Ref {
    std::size_t short_cap, long_cap;
    std::uint64_t promote;
    std::uint64_t clock = 0;
    struct E {
      std::uint64_t key, hits, last;
    };
    std::vector<E> shorts;  // most recent first
    std::vector<E> longs;
    std::uint64_t short_ev = 0, long_ev = 0, promotions = 0, lookups = 0, hit_count = 0;

    void put(std::uint64_t key) {
      ++clock;
      std::erase_if(shorts, [&](const E& e) { return e.key == key; });
      std::erase_if(longs, [&](const E& e) { return e.key == key; });
      while (shorts.size() >= short_cap) {
        shorts.pop_back();
        ++short_ev;
      }
      shorts.insert(shorts.begin(), {key, 0, clock});
    }
    bool get(std::uint64_t key) {
      ++clock;
      ++lookups;
      for (auto& e : longs)
        if (e.key == key) {
          ++hit_count;
          ++e.hits;
          e.last = clock;
          return true;
        }
      for (std::size_t i = 0; i < shorts.size(); ++i) {
        if (shorts[i].key != key) continue;
        ++hit_count;
        E e = shorts[i];
        ++e.hits;
        e.last = clock;
        shorts.erase(shorts.begin() + static_cast<std::ptrdiff_t>(i));
        if (e.hits >= promote) {
          if (longs.size() >= long_cap) {
            auto victim = std::min_element(longs.begin(), longs.end(), [](const E& a, const E& b) {
              return std::tie(a.hits, a.last, a.key) < std::tie(b.hits, b.last, b.key);
            });
            longs.erase(victim);
            ++long_ev;
          }
          longs.push_back(e);
          ++promotions;
        } else {
          shorts.insert(shorts.begin(), e);
        }
        return true;
      }
      return false;
    }
  };

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    CacheConfig cfg;
    cfg.short_capacity = 2 + trial % 5;
    cfg.long_capacity = 1 + trial % 3;
    cfg.promote_after = 1 + trial % 3;
    MMCache cache(cfg);
    Ref ref{cfg.short_capacity, cfg.long_capacity, cfg.promote_after, 0, {}, {}};
    std::uniform_int_distribution<int> key(0, 11), op(0, 2);
    for (int step = 0; step < 400; ++step) {
      const int k = key(rng);
      const auto sig = det_sig(k);
      if (op(rng) == 0) {
        cache.put_result(sig, std::to_string(k), true);
        ref.put(signature_key(sig));
      } else {
        ASSERT_EQ(cache.get_exact(sig).has_value(), ref.get(signature_key(sig))) << "trial " << trial;
      }
      ASSERT_EQ(cache.size(), ref.shorts.size() + ref.longs.size());
    }
    for (const auto& e : ref.longs) EXPECT_EQ(cache.peek(e.key)->tier, Tier::Long);
    for (const auto& e : ref.shorts) EXPECT_EQ(cache.peek(e.key)->tier, Tier::Short);
    const auto s = cache.stats();
    EXPECT_EQ(s.short_tier.evictions, ref.short_ev);
    EXPECT_EQ(s.long_tier.evictions, ref.long_ev);
    EXPECT_EQ(s.short_tier.promotions, ref.promotions);
    EXPECT_EQ(s.symbolic.lookups, ref.lookups);
    EXPECT_EQ(s.symbolic.hits, ref.hit_count);
  }
}

TEST(Oracles, PathAndFanOutSignaturesDiffer) {
  const auto& f = Fixture::get();
  AbstractWorkflow path = chain_of({"A3", "A4", "A5"});
  AbstractWorkflow fan;
  fan.nodes = {"A3", "A4", "A5"};
  fan.edges = {{"A3", "A4", EdgeKind::Data, false}, {"A3", "A5", EdgeKind::Data, false}};
  const auto ps = plan_signature(path, f.registry), fs = plan_signature(fan, f.registry);
  EXPECT_NE(ps.value, fs.value);
  MMCache cache;
  cache.put_plan(ps.value, {});
  EXPECT_TRUE(cache.get_plan(ps.value));
  EXPECT_FALSE(cache.get_plan(fs.value));
}

TEST(Oracles, SessionCountersMatchTelemetryRecount) {
  const auto& f = Fixture::get();
  Simulator sim(f.registry, f.pools);
  MMCache cache;
  Statistics stats;
  SessionConfig cfg;
  cfg.runs = 4;
  cfg.seed = 3;
  // The replay reads the same source data, so it can reuse the first session.
  std::size_t from_log = 0, from_runs = 0;
  for (int pass = 0; pass < 2; ++pass) {
    auto r = run_session(latency_plan(), sim, stats, &cache, cfg);
    for (const auto& t : r.telemetry) from_log += t.cache_hit;
    for (const auto& run : r.runs) from_runs += run.cache_hits;
  }
  const auto s = cache.stats();
  EXPECT_GT(from_log, 0U);
  EXPECT_EQ(from_log, from_runs);
  EXPECT_EQ(from_log, s.symbolic.hits + s.semantic.hits);
}

TEST(Oracles, FaultTriplesSampleMean) {
  const auto& f = Fixture::get();
  const auto plan = latency_plan();
  const auto& a5 = *f.registry.find_agent("A5");
  const double est =
      estimate_node(a5, plan.bindings.at("A5"), workload_for(plan.base, a5), f.pools).m(Dim::Latency);
  Simulator slow(f.registry, f.pools);
  slow.inject({{plan.bindings.at("A5").engine, 3.0, 0.0}});
  const int n = 10000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    auto run = slow.run(plan, {21, "run-" + std::to_string(i), 0, 0.0});
    for (const auto& t : run.telemetry)
      if (t.agent_id == "A5") sum += t.latency_ms;
  }
  EXPECT_NEAR(sum / n, 3.0 * est, 0.05 * 3.0 * est);
}

TEST(Oracles, GeneratedWorkloadSharesDeterministicWork) {
  const auto registry = generator_registry();
  const auto pools = generator_pools();
  BenchOptions opts;
  opts.seed = 500;
  opts.max_space = 100000;
  auto report = bench(generate(500, WorkloadProfile::defaults(), 500), registry, pools, opts);
  EXPECT_GT(report.first.symbolic_hit_rate(), 0.0);
  EXPECT_TRUE(report.transparent);
  ASSERT_TRUE(report.baseline);
  EXPECT_LT(report.first.latency_ms, report.baseline->latency_ms);
}
