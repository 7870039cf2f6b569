#include "agentplan/mmcache.hpp"

#include <algorithm>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cctype>
#include <cmath>
#include <ostream>

#include "agentplan/hash.hpp"
#include "agentplan/kernels.hpp"
#include "json.hpp"

namespace agentplan {

namespace {

// Accepts similarities within float rounding of the threshold, so identical
// normalized requests hit even at tau = 1.
constexpr double kSimilaritySlack = 1e-6;

std::string base64(const std::string& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<std::string_view> tokens_of(std::string_view normalized) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < normalized.size()) {
    auto j = normalized.find(' ', i);
    if (j == std::string_view::npos) j = normalized.size();
    if (j > i) out.push_back(normalized.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

} // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (std::ispunct(c)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::uint64_t structural_key(const TaskSignature& sig) {
  std::uint64_t h = fnv1a(sig.capability, fnv1a("structural"));
  for (const auto& [name, value] : sig.param_slots) h = hash_combine(h, fnv1a(value, fnv1a("=", fnv1a(name))));
  return h;
}

std::uint64_t signature_key(const TaskSignature& sig) {
  std::uint64_t h = structural_key(sig);
  h = hash_combine(h, fnv1a(sig.input_digest, fnv1a("input")));
  h = hash_combine(h, fnv1a(normalize_text(sig.free_text), fnv1a("text")));
  return h;
}

// ---------------------------------------------------------------------------
// Embeddings

std::size_t HashingEmbedder::bucket_of(std::string_view token) const { return fnv1a(token) % dim_; }

Embedding HashingEmbedder::embed(std::string_view text) const {
  Embedding e;
  e.values.assign(dim_, 0.0f);
  const auto norm = normalize_text(text);
  const auto tokens = tokens_of(norm);
  if (tokens.empty()) return e;
  for (auto t : tokens) e.values[bucket_of(t)] += 1.0f;
  double sq = 0.0;
  for (float v : e.values) sq += static_cast<double>(v) * v;
  const float inv = static_cast<float>(1.0 / std::sqrt(sq));
  for (float& v : e.values) v *= inv;
  e.embeddable = true;
  return e;
}

Embedding embed(std::string_view text) {
  static const HashingEmbedder reference;
  return reference.embed(text);
}

double cosine(const Embedding& a, const Embedding& b) {
  if (!a.embeddable || !b.embeddable || a.values.size() != b.values.size()) return 0.0;
  return kernels::dot(a.values, b.values);
}

// ---------------------------------------------------------------------------
// Plan signatures

PlanSignature plan_signature(const AbstractWorkflow& w, const Registry& registry) {
  std::map<std::string, std::uint64_t> color;
  for (const auto& n : w.nodes) {
    const auto* a = registry.find_agent(n);
    color[n] = fnv1a(a ? a->capability : n, fnv1a("cap"));
  }
  for (int round = 0; round < kRefinementRounds; ++round) {
    std::map<std::string, std::array<std::vector<std::uint64_t>, 4>> nbr;
    for (const auto& e : w.edges) {
      if (!color.contains(e.from) || !color.contains(e.to)) continue;
      const std::size_t base = e.kind == EdgeKind::Data ? 0 : 2;
      nbr[e.to][base + 0].push_back(color[e.from]);
      nbr[e.from][base + 1].push_back(color[e.to]);
    }
    std::map<std::string, std::uint64_t> next;
    for (const auto& [n, c] : color) {
      std::uint64_t h = hash_combine(c, static_cast<std::uint64_t>(round));
      auto& lists = nbr[n];
      for (std::size_t k = 0; k < lists.size(); ++k) {
        auto& l = lists[k];
        std::sort(l.begin(), l.end());
        h = hash_combine(h, 0xa11ce + k);
        for (auto x : l) h = hash_combine(h, x);
      }
      next[n] = h;
    }
    color = std::move(next);
  }
  std::vector<std::uint64_t> multiset;
  for (const auto& [_, c] : color) multiset.push_back(c);
  std::sort(multiset.begin(), multiset.end());
  std::uint64_t h = hash_combine(fnv1a("plan-signature"), multiset.size());
  std::size_t data_edges = 0;
  for (const auto& e : w.edges) data_edges += e.kind == EdgeKind::Data;
  h = hash_combine(h, data_edges);
  for (auto c : multiset) h = hash_combine(h, c);
  return {h, std::move(color)};
}

namespace {

std::vector<std::string> nodes_by_color(const AbstractWorkflow& w, const PlanSignature& sig) {
  std::vector<std::string> nodes = w.nodes;
  std::sort(nodes.begin(), nodes.end(), [&](const auto& a, const auto& b) {
    return std::pair(sig.node_colors.at(a), a) < std::pair(sig.node_colors.at(b), b);
  });
  return nodes;
}

} // namespace

PlanFragment make_fragment(const std::map<std::string, Binding>& bindings, const AbstractWorkflow& w,
                           const Registry& registry, const PlanSignature& sig, const CostDistribution& cost) {
  PlanFragment f;
  f.cost = cost;
  for (const auto& n : nodes_by_color(w, sig)) {
    const auto* a = registry.find_agent(n);
    const auto& b = bindings.at(n);
    f.slots.push_back({sig.node_colors.at(n), a ? a->capability : n, b.model, b.engine});
  }
  return f;
}

std::optional<std::map<std::string, Binding>> apply_fragment(const PlanFragment& fragment, const AbstractWorkflow& w,
                                                             const Registry& registry, const PlanSignature& sig) {
  std::vector<bool> used(fragment.slots.size(), false);
  std::map<std::string, Binding> out;
  for (const auto& n : nodes_by_color(w, sig)) {
    const auto* a = registry.find_agent(n);
    const std::string cap = a ? a->capability : n;
    const auto color = sig.node_colors.at(n);
    bool matched = false;
    for (std::size_t i = 0; i < fragment.slots.size() && !matched; ++i) {
      const auto& s = fragment.slots[i];
      if (used[i] || s.color != color || s.capability != cap) continue;
      used[i] = true;
      out[n] = Binding{n, s.model, s.engine};
      matched = true;
    }
    if (!matched) return std::nullopt;
  }
  return out;
}

// ---------------------------------------------------------------------------
// MMCache

std::string_view to_string(EntryKind k) {
  switch (k) {
    case EntryKind::Result: return "result";
    case EntryKind::Plan: return "plan";
    case EntryKind::Policy: return "policy";
  }
  return "?";
}

std::string_view to_string(Tier t) { return t == Tier::Short ? "short" : "long"; }

MMCache::MMCache(CacheConfig config, std::shared_ptr<const Embedder> embedder)
    : config_(config), embedder_(embedder ? std::move(embedder) : std::make_shared<HashingEmbedder>()) {}

bool MMCache::expired(const CacheEntry& e) const { return config_.ttl && clock_ - e.created_at > *config_.ttl; }

void MMCache::index_locked(const CacheEntry& e) {
  if (!e.embedding) return;
  auto& b = semantic_[e.structural];
  b.keys.push_back(e.key);
  b.rows.insert(b.rows.end(), e.embedding->begin(), e.embedding->end());
}

void MMCache::unindex_locked(const CacheEntry& e) {
  if (!e.embedding) return;
  auto it = semantic_.find(e.structural);
  if (it == semantic_.end()) return;
  auto& b = it->second;
  const std::size_t d = embedder_->dim();
  for (std::size_t i = 0; i < b.keys.size(); ++i) {
    if (b.keys[i] != e.key) continue;
    const std::size_t last = b.keys.size() - 1;
    if (i != last) {
      b.keys[i] = b.keys[last];
      std::copy_n(b.rows.begin() + static_cast<std::ptrdiff_t>(last * d), d,
                  b.rows.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    b.keys.pop_back();
    b.rows.resize(b.keys.size() * d);
    break;
  }
  if (b.keys.empty()) semantic_.erase(it);
}

void MMCache::erase_locked(std::uint64_t key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return;
  auto& e = it->second;
  if (e.tier == Tier::Short) {
    if (auto p = lru_pos_.find(key); p != lru_pos_.end()) {
      lru_.erase(p->second);
      lru_pos_.erase(p);
    }
  } else {
    lfu_.erase({e.hits, e.last_hit, key});
  }
  unindex_locked(e);
  entries_.erase(it);
}

void MMCache::evict_short_locked() {
  if (lru_.empty()) return;
  erase_locked(lru_.back());
  ++stats_.short_tier.evictions;
}

void MMCache::evict_long_locked() {
  if (lfu_.empty()) return;
  erase_locked(std::get<2>(*lfu_.begin()));
  ++stats_.long_tier.evictions;
}

void MMCache::record_hit_locked(CacheEntry& e) {
  if (e.tier == Tier::Long) lfu_.erase({e.hits, e.last_hit, e.key});
  ++e.hits;
  e.last_hit = clock_;
  if (e.tier == Tier::Long) {
    lfu_.insert({e.hits, e.last_hit, e.key});
    return;
  }
  auto pos = lru_pos_.at(e.key);
  if (e.hits >= config_.promote_after && config_.long_capacity > 0) {
    lru_.erase(pos);
    lru_pos_.erase(e.key);
    if (lfu_.size() >= config_.long_capacity) evict_long_locked();
    e.tier = Tier::Long;
    lfu_.insert({e.hits, e.last_hit, e.key});
    ++stats_.short_tier.promotions;
    return;
  }
  lru_.splice(lru_.begin(), lru_, pos);
}

std::optional<ResultHit> MMCache::get_exact(const TaskSignature& sig) {
  const auto key = signature_key(sig);
  std::lock_guard lock(mu_);
  ++clock_;
  ++stats_.symbolic.lookups;
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  if (expired(it->second)) {
    erase_locked(key);
    ++stats_.symbolic.stale;
    return std::nullopt;
  }
  ++stats_.symbolic.hits;
  auto& e = it->second;
  ResultHit hit{e.payload, 1.0, key};
  record_hit_locked(e);
  return hit;
}

std::optional<ResultHit> MMCache::get_semantic(const TaskSignature& sig, double tau) {
  const auto query = embedder_->embed(sig.free_text);
  const auto skey = structural_key(sig);
  std::lock_guard lock(mu_);
  ++clock_;
  ++stats_.semantic.lookups;
  if (!query.embeddable) return std::nullopt;
  auto bit = semantic_.find(skey);
  if (bit == semantic_.end()) return std::nullopt;

  // Drop expired members first so the scan sees only live rows.
  if (config_.ttl) {
    std::vector<std::uint64_t> dead;
    for (auto k : bit->second.keys)
      if (expired(entries_.at(k))) dead.push_back(k);
    for (auto k : dead) {
      erase_locked(k);
      ++stats_.semantic.stale;
    }
    bit = semantic_.find(skey);
    if (bit == semantic_.end()) return std::nullopt;
  }

  const auto& bucket = bit->second;
  std::vector<float> sims(bucket.keys.size());
  kernels::dot_rows(query.values, bucket.rows, embedder_->dim(), sims);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    if (sims[i] + kSimilaritySlack < tau) continue;
    if (!best || sims[i] > sims[*best] || (sims[i] == sims[*best] && bucket.keys[i] < bucket.keys[*best])) best = i;
  }
  if (!best) return std::nullopt;
  const auto key = bucket.keys[*best];
  auto& e = entries_.at(key);
  ResultHit hit{e.payload, std::min(1.0, static_cast<double>(sims[*best])), key};
  ++stats_.semantic.hits;
  record_hit_locked(e);
  return hit;
}

std::optional<CacheEntry> MMCache::put_result(const TaskSignature& sig, std::string payload,
                                              bool deterministic_source) {
  std::optional<std::vector<float>> embedding;
  if (!deterministic_source) {
    auto e = embedder_->embed(sig.free_text);
    if (e.embeddable) embedding = std::move(e.values);
  }
  const auto key = signature_key(sig);
  std::lock_guard lock(mu_);
  ++clock_;
  if (payload.size() > config_.max_payload_bytes) {
    ++stats_.short_tier.rejected;
    return std::nullopt;
  }
  if (config_.short_capacity == 0) return std::nullopt;
  erase_locked(key);
  while (lru_.size() >= config_.short_capacity) evict_short_locked();

  CacheEntry e;
  e.kind = EntryKind::Result;
  e.key = key;
  e.structural = structural_key(sig);
  e.embedding = std::move(embedding);
  e.payload = std::move(payload);
  e.deterministic_source = deterministic_source;
  e.tier = Tier::Short;
  e.created_at = clock_;
  e.last_hit = clock_;
  lru_.push_front(key);
  lru_pos_[key] = lru_.begin();
  index_locked(e);
  auto [it, _] = entries_.insert_or_assign(key, std::move(e));
  return it->second;
}

void MMCache::put_plan(std::uint64_t signature, std::vector<PlanFragment> fragments) {
  std::lock_guard lock(mu_);
  ++clock_;
  plans_[signature] = std::move(fragments);
}

std::optional<std::vector<PlanFragment>> MMCache::get_plan(std::uint64_t signature) {
  std::lock_guard lock(mu_);
  ++clock_;
  ++stats_.plan.lookups;
  auto it = plans_.find(signature);
  if (it == plans_.end()) return std::nullopt;
  ++stats_.plan.hits;
  return it->second;
}

void MMCache::put_policy(std::uint64_t context, PolicyDecision decision) {
  std::lock_guard lock(mu_);
  ++clock_;
  policies_[context] = decision;
}

std::optional<PolicyDecision> MMCache::get_policy(std::uint64_t context) {
  std::lock_guard lock(mu_);
  ++clock_;
  ++stats_.policy.lookups;
  auto it = policies_.find(context);
  if (it == policies_.end()) return std::nullopt;
  ++stats_.policy.hits;
  return it->second;
}

void MMCache::record_stale_policy() {
  std::lock_guard lock(mu_);
  ++stats_.policy.stale;
}

CacheStats MMCache::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void MMCache::reset_stats() {
  std::lock_guard lock(mu_);
  stats_ = {};
}

std::size_t MMCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::optional<CacheEntry> MMCache::peek(std::uint64_t key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void MMCache::export_jsonl(std::ostream& os) const {
  std::lock_guard lock(mu_);
  std::vector<std::uint64_t> keys;
  for (const auto& [k, _] : entries_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (auto k : keys) {
    const auto& e = entries_.at(k);
    nlohmann::json j{{"kind", to_string(e.kind)},
                     {"key", to_hex(e.key)},
                     {"tier", to_string(e.tier)},
                     {"hits", e.hits},
                     {"created_at", e.created_at},
                     {"last_hit", e.last_hit},
                     {"deterministic_source", e.deterministic_source},
                     {"payload", base64(e.payload)}};
    if (e.embedding) j["embedding"] = *e.embedding;
    os << j.dump() << '\n';
  }
  for (const auto& [sig, fragments] : plans_) {
    nlohmann::json frs = nlohmann::json::array();
    for (const auto& f : fragments) {
      nlohmann::json slots = nlohmann::json::array();
      for (const auto& s : f.slots) {
        nlohmann::json js{{"color", to_hex(s.color)}, {"capability", s.capability}, {"engine", s.engine}};
        if (s.model) js["model"] = *s.model;
        slots.push_back(std::move(js));
      }
      frs.push_back({{"slots", std::move(slots)}, {"cost_means", f.cost.mean}});
    }
    os << nlohmann::json{{"kind", "plan"}, {"key", to_hex(sig)}, {"fragments", std::move(frs)}}.dump() << '\n';
  }
  for (const auto& [ctx, d] : policies_) {
    os << nlohmann::json{{"kind", "policy"},
                         {"key", to_hex(ctx)},
                         {"plan_hash", to_hex(d.plan_hash)},
                         {"frontier_digest", to_hex(d.frontier_digest)}}
              .dump()
       << '\n';
  }
}

} // namespace agentplan
