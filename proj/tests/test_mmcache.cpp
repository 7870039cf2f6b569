#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "agentplan/mmcache.hpp"
#include "support.hpp"

using namespace agentplan;
using agentplan::testing::chain_of;
using agentplan::testing::Fixture;

namespace {

TaskSignature request(const std::string& entity, const std::string& text) {
  return {"sql-generation", "warehouse", {{"entity", entity}, {"k", "10"}, {"metric", "revenue"}}, text};
}

TaskSignature det_sig(int i) { return {"relational-extract", "in-" + std::to_string(i), {}, "extract rows"}; }

} // namespace

TEST(MMCache, NormalizeText) {
  EXPECT_EQ(normalize_text("  Show me, the TOP 10   customers!! "), "show me the top 10 customers");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("?!"), "");
}

TEST(MMCache, EmbeddingsAreNormalized) {
  auto e = embed("top 10 customers by revenue");
  ASSERT_TRUE(e.embeddable);
  double n = 0;
  for (float v : e.values) n += static_cast<double>(v) * v;
  EXPECT_NEAR(n, 1.0, 1e-6);
  EXPECT_FALSE(embed("   ").embeddable);
  EXPECT_EQ(cosine(embed(""), e), 0.0);
  EXPECT_NEAR(cosine(e, embed("Top 10 customers, by revenue.")), 1.0, 1e-6);
}

TEST(MMCache, SymbolicTierExactHit) {
  MMCache cache;
  auto sig = det_sig(1);
  EXPECT_FALSE(cache.get_exact(sig));
  ASSERT_TRUE(cache.put_result(sig, "rows", true));
  auto hit = cache.get_exact(sig);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->payload, "rows");
  EXPECT_FALSE(cache.get_exact(det_sig(2)));
  auto s = cache.stats();
  EXPECT_EQ(s.symbolic.lookups, 3U);
  EXPECT_EQ(s.symbolic.hits, 1U);
  // Deterministic results never enter the semantic tier.
  EXPECT_FALSE(cache.get_semantic(sig, 0.0));
}

TEST(MMCache, HybridGuardSeparatesSlots) {
  MMCache cache;
  const auto customers = request("customers", "show me top 10 customers by revenue");
  const auto products = request("products", "show me top 10 products by revenue");
  cache.put_result(customers, "c", false);
  for (double tau : {-1.0, 0.0, 0.5, 0.85, 1.0})
    EXPECT_FALSE(cache.get_semantic(products, tau)) << tau;
  EXPECT_NE(structural_key(customers), structural_key(products));

  auto again = request("customers", "Show me TOP 10 customers, by revenue!");
  auto hit = cache.get_semantic(again, 1.0);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->payload, "c");
  auto paraphrase = request("customers", "list top 10 customers by revenue");
  EXPECT_TRUE(cache.get_semantic(paraphrase, 0.5));
  EXPECT_FALSE(cache.get_semantic(paraphrase, 0.99));
}

TEST(MMCache, LruEvictionAndPromotion) {
  CacheConfig cfg;
  cfg.short_capacity = 2;
  cfg.long_capacity = 1;
  cfg.promote_after = 2;
  MMCache cache(cfg);
  cache.put_result(det_sig(1), "1", true);
  cache.put_result(det_sig(2), "2", true);
  EXPECT_TRUE(cache.get_exact(det_sig(1)));  // 1 becomes most recent
  cache.put_result(det_sig(3), "3", true);    // evicts 2
  EXPECT_FALSE(cache.get_exact(det_sig(2)));
  EXPECT_EQ(cache.stats().short_tier.evictions, 1U);

  EXPECT_TRUE(cache.get_exact(det_sig(1)));  // second hit promotes
  EXPECT_EQ(cache.peek(signature_key(det_sig(1)))->tier, Tier::Long);
  EXPECT_EQ(cache.stats().short_tier.promotions, 1U);

  EXPECT_TRUE(cache.get_exact(det_sig(3)));
  EXPECT_TRUE(cache.get_exact(det_sig(3)));  // promotes 3, long tier full
  EXPECT_EQ(cache.stats().long_tier.evictions, 1U);
  EXPECT_EQ(cache.size(), 1U);
  EXPECT_TRUE(cache.get_exact(det_sig(3)));
}

TEST(MMCache, TtlAndPayloadLimit) {
  CacheConfig cfg;
  cfg.ttl = 2;
  cfg.max_payload_bytes = 4;
  MMCache cache(cfg);
  EXPECT_FALSE(cache.put_result(det_sig(1), "too long", true));
  EXPECT_EQ(cache.stats().short_tier.rejected, 1U);
  cache.put_result(det_sig(1), "ok", true);
  EXPECT_TRUE(cache.get_exact(det_sig(1)));
  cache.get_exact(det_sig(9));
  EXPECT_FALSE(cache.get_exact(det_sig(1)));
  EXPECT_EQ(cache.stats().symbolic.stale, 1U);
}

TEST(MMCache, PlanSignatureAndFragments) {
  const auto& f = Fixture::get();
  auto w = f.workflow;
  auto shuffled = w;
  std::reverse(shuffled.nodes.begin(), shuffled.nodes.end());
  std::reverse(shuffled.edges.begin(), shuffled.edges.end());
  auto sig = plan_signature(w, f.registry);
  EXPECT_EQ(sig.value, plan_signature(shuffled, f.registry).value);
  auto cut = w;
  cut.edges.erase(cut.edges.begin() + 3);
  EXPECT_NE(sig.value, plan_signature(cut, f.registry).value);

  std::map<std::string, Binding> bindings;
  for (const auto& n : w.nodes)
    bindings[n] = candidate_bindings(*f.registry.find_agent(n), f.pools).back();
  auto frag = make_fragment(bindings, w, f.registry, sig, CostDistribution{});
  auto back = apply_fragment(frag, shuffled, f.registry, plan_signature(shuffled, f.registry));
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, bindings);

  MMCache cache;
  EXPECT_FALSE(cache.get_plan(sig.value));
  cache.put_plan(sig.value, {frag});
  ASSERT_TRUE(cache.get_plan(sig.value));
  EXPECT_EQ(cache.stats().plan.hits, 1U);
}

TEST(MMCache, PolicyCacheAndExport) {
  MMCache cache;
  cache.put_policy(7, {42, 99});
  auto d = cache.get_policy(7);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->plan_hash, 42U);
  EXPECT_FALSE(cache.get_policy(8));
  cache.put_result(det_sig(1), std::string("\x01\x02", 2), true);
  std::ostringstream os;
  cache.export_jsonl(os);
  auto text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_NE(text.find("\"policy\""), std::string::npos);
  cache.reset_stats();
  EXPECT_EQ(cache.stats(), CacheStats{});
}
