#pragma once

// Multi-layer cache: an exact-match symbolic tier and a similarity-based
// semantic tier for task results (short-term LRU with promotion into a
// long-term LFU tier), a plan-fragment cache keyed by canonical labeled
// subgraph signatures, and a policy cache of past selection decisions.

#include <cstdint>
#include <iosfwd>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agentplan/cost_model.hpp"
#include "agentplan/workflow.hpp"

namespace agentplan {

/// Lowercase, punctuation stripped, whitespace collapsed and trimmed.
std::string normalize_text(std::string_view text);

struct TaskSignature {
  std::string capability;
  std::string input_digest;
  /// Ordered (name, value) pairs extracted from the request.
  std::vector<std::pair<std::string, std::string>> param_slots;
  std::string free_text;
};

/// Exact-match key over the normalized signature.
std::uint64_t signature_key(const TaskSignature& sig);

/// Key of the structural half of the hybrid equivalence test: capability and
/// every slot name and value.
std::uint64_t structural_key(const TaskSignature& sig);

struct Embedding {
  std::vector<float> values;
  /// False for empty text; the vector is then all zeros.
  bool embeddable = false;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;
};

/// Reference embedding: normalized tokens hashed into `dim` buckets, bucket
/// counts L2-normalized. Deterministic.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 256;
  explicit HashingEmbedder(std::size_t dim = kDefaultDim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  Embedding embed(std::string_view text) const override;
  std::size_t bucket_of(std::string_view token) const;

 private:
  std::size_t dim_;
};

/// Convenience wrapper over the default HashingEmbedder.
Embedding embed(std::string_view text);

/// Cosine of two embeddings; 0 when either is not embeddable.
double cosine(const Embedding& a, const Embedding& b);

// ---------------------------------------------------------------------------
// Plan signatures

/// Directed neighborhood-refinement (Weisfeiler-Lehman style) colors over
/// capability labels.
struct PlanSignature {
  std::uint64_t value = 0;
  /// Final color per node id.
  std::map<std::string, std::uint64_t> node_colors;
};

inline constexpr int kRefinementRounds = 3;

PlanSignature plan_signature(const AbstractWorkflow& w, const Registry& registry);

/// One cached plan: a binding per node, addressed by refined color and
/// capability so that relabeled isomorphic workflows can reuse it.
struct PlanFragment {
  struct Slot {
    std::uint64_t color = 0;
    std::string capability;
    std::optional<std::string> model;
    std::string engine;
  };
  std::vector<Slot> slots;
  CostDistribution cost;
};

/// Maps a cached fragment onto the nodes of `w` (same signature). Returns
/// nullopt if some node cannot be matched.
std::optional<std::map<std::string, Binding>> apply_fragment(const PlanFragment& fragment, const AbstractWorkflow& w,
                                                             const Registry& registry, const PlanSignature& sig);

PlanFragment make_fragment(const std::map<std::string, Binding>& bindings, const AbstractWorkflow& w,
                           const Registry& registry, const PlanSignature& sig, const CostDistribution& cost);

// ---------------------------------------------------------------------------
// Cache

enum class EntryKind { Result, Plan, Policy };
enum class Tier { Short, Long };

std::string_view to_string(EntryKind k);
std::string_view to_string(Tier t);

struct CacheEntry {
  EntryKind kind = EntryKind::Result;
  std::uint64_t key = 0;
  std::uint64_t structural = 0;
  /// Present only for stochastic results (semantic tier members).
  std::optional<std::vector<float>> embedding;
  std::string payload;
  bool deterministic_source = true;
  Tier tier = Tier::Short;
  std::uint64_t hits = 0;
  std::uint64_t created_at = 0;
  std::uint64_t last_hit = 0;
};

struct CacheConfig {
  double tau = 0.85;
  std::size_t short_capacity = 1024;
  std::size_t long_capacity = 8192;
  std::uint64_t promote_after = 3;
  /// Logical ticks an entry stays valid; nullopt = forever.
  std::optional<std::uint64_t> ttl;
  std::size_t max_payload_bytes = 1U << 20;
  /// Simulated latency of a cache hit.
  double lookup_cost_ms = 1.0;
};

struct TierCounters {
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;
  std::uint64_t promotions = 0;
  std::uint64_t evictions = 0;
  std::uint64_t stale = 0;
  std::uint64_t rejected = 0;

  friend bool operator==(const TierCounters&, const TierCounters&) = default;
};

struct CacheStats {
  TierCounters symbolic;
  TierCounters semantic;
  TierCounters short_tier;
  TierCounters long_tier;
  TierCounters plan;
  TierCounters policy;

  friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

struct ResultHit {
  std::string payload;
  double similarity = 1.0;
  std::uint64_t key = 0;
};

struct PolicyDecision {
  std::uint64_t plan_hash = 0;
  /// Digest of the frontier the decision was made on.
  std::uint64_t frontier_digest = 0;
};

class MMCache {
 public:
  explicit MMCache(CacheConfig config = {}, std::shared_ptr<const Embedder> embedder = nullptr);

  MMCache(const MMCache&) = delete;
  MMCache& operator=(const MMCache&) = delete;

  const CacheConfig& config() const { return config_; }
  const Embedder& embedder() const { return *embedder_; }

  std::optional<ResultHit> get_exact(const TaskSignature& sig);
  /// Hybrid equivalence: structural match on capability and every param slot,
  /// then cosine(embed(free_text), entry) >= tau over stochastic entries.
  std::optional<ResultHit> get_semantic(const TaskSignature& sig, double tau);
  std::optional<ResultHit> get_semantic(const TaskSignature& sig) { return get_semantic(sig, config_.tau); }

  /// Inserts into the short tier. Returns the stored entry, or nullopt if the
  /// payload exceeds the size limit (counted as rejected).
  std::optional<CacheEntry> put_result(const TaskSignature& sig, std::string payload, bool deterministic_source);

  void put_plan(std::uint64_t signature, std::vector<PlanFragment> fragments);
  std::optional<std::vector<PlanFragment>> get_plan(std::uint64_t signature);

  void put_policy(std::uint64_t context, PolicyDecision decision);
  std::optional<PolicyDecision> get_policy(std::uint64_t context);
  /// Called by the selector when a policy hit names a plan missing from the
  /// current frontier.
  void record_stale_policy();

  CacheStats stats() const;
  void reset_stats();

  std::size_t size() const;  ///< result entries over both tiers
  std::optional<CacheEntry> peek(std::uint64_t key) const;

  /// One JSON object per line: result entries, then plans, then policies.
  /// Payloads are base64.
  void export_jsonl(std::ostream& os) const;

 private:
  struct Bucket {
    std::vector<std::uint64_t> keys;
    std::vector<float> rows;
  };
  using LfuKey = std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>;  // hits, last_hit, key

  bool expired(const CacheEntry& e) const;
  void erase_locked(std::uint64_t key);
  void evict_short_locked();
  void evict_long_locked();
  void record_hit_locked(CacheEntry& e);
  void index_locked(const CacheEntry& e);
  void unindex_locked(const CacheEntry& e);

  CacheConfig config_;
  std::shared_ptr<const Embedder> embedder_;
  mutable std::mutex mu_;
  std::uint64_t clock_ = 0;

  std::unordered_map<std::uint64_t, CacheEntry> entries_;
  std::list<std::uint64_t> lru_;  // short tier, most recent first
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> lru_pos_;
  std::set<LfuKey> lfu_;  // long tier
  std::unordered_map<std::uint64_t, Bucket> semantic_;

  std::map<std::uint64_t, std::vector<PlanFragment>> plans_;
  std::map<std::uint64_t, PolicyDecision> policies_;

  CacheStats stats_;
};

} // namespace agentplan
