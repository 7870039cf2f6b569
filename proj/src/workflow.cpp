#include "agentplan/workflow.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "agentplan/error.hpp"
#include "agentplan/hash.hpp"

namespace agentplan {

namespace {

constexpr std::array<std::pair<Modality, std::string_view>, 6> kModalities{{
    {Modality::Structured, "structured"},
    {Modality::UnstructuredText, "unstructured-text"},
    {Modality::Stream, "stream"},
    {Modality::Vector, "vector"},
    {Modality::Image, "image"},
    {Modality::Mixed, "mixed"},
}};

constexpr std::array<std::pair<StructureLabel, std::string_view>, 10> kLabels{{
    {StructureLabel::Chain, "chain"},
    {StructureLabel::BranchingChain, "branching-chain"},
    {StructureLabel::Tree, "tree"},
    {StructureLabel::Dag, "dag"},
    {StructureLabel::OrchestratedDag, "orchestrated-dag"},
    {StructureLabel::FeedbackGraph, "feedback-graph"},
    {StructureLabel::PubSub, "pub-sub"},
    {StructureLabel::Cyclic, "cyclic"},
    {StructureLabel::Mesh, "mesh"},
    {StructureLabel::Hybrid, "hybrid"},
}};

template <typename E, std::size_t N>
std::string_view lookup_name(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [k, v] : table)
    if (k == e) return v;
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> lookup_value(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s) {
  for (const auto& [k, v] : table)
    if (v == s) return k;
  return std::nullopt;
}

bool tag_only_label(StructureLabel s) {
  return s == StructureLabel::PubSub || s == StructureLabel::Cyclic || s == StructureLabel::Mesh ||
         s == StructureLabel::Hybrid;
}

// Index-based adjacency over data edges. Duplicate edges collapse.
struct DataGraph {
  std::vector<std::string> ids;  // sorted
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::vector<std::size_t>> in;
  bool dangling = false;

  explicit DataGraph(const AbstractWorkflow& w) : ids(w.nodes) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
    out.resize(ids.size());
    in.resize(ids.size());
    for (const auto& e : w.edges) {
      auto f = index.find(e.from);
      auto t = index.find(e.to);
      if (f == index.end() || t == index.end()) {
        dangling = true;
        continue;
      }
      if (e.kind != EdgeKind::Data) continue;
      out[f->second].push_back(t->second);
      in[t->second].push_back(f->second);
    }
    for (auto& v : out) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (auto& v : in) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  std::size_t size() const { return ids.size(); }

  // Kahn layers; nodes left over sit on a cycle (or downstream of one).
  std::vector<std::vector<std::size_t>> layers(std::vector<std::size_t>* leftover = nullptr) const {
    std::vector<std::size_t> indeg(size());
    for (std::size_t v = 0; v < size(); ++v) indeg[v] = in[v].size();
    std::vector<std::vector<std::size_t>> result;
    std::vector<std::size_t> frontier;
    for (std::size_t v = 0; v < size(); ++v)
      if (indeg[v] == 0) frontier.push_back(v);
    std::size_t placed = 0;
    while (!frontier.empty()) {
      result.push_back(frontier);
      placed += frontier.size();
      std::vector<std::size_t> next;
      for (auto u : frontier)
        for (auto v : out[u])
          if (--indeg[v] == 0) next.push_back(v);
      std::sort(next.begin(), next.end());
      frontier = std::move(next);
    }
    if (leftover) {
      leftover->clear();
      if (placed != size())
        for (std::size_t v = 0; v < size(); ++v)
          if (indeg[v] > 0) leftover->push_back(v);
    }
    return result;
  }

  bool weakly_connected() const {
    if (size() == 0) return true;
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (const auto* adj : {&out[u], &in[u]})
        for (auto v : *adj)
          if (!seen[v]) {
            seen[v] = true;
            ++count;
            stack.push_back(v);
          }
    }
    return count == size();
  }
};

void require_acyclic(const AbstractWorkflow& w, const DataGraph& g) {
  if (g.dangling) throw InvalidWorkflow("workflow '" + w.name + "' has an edge to an unknown node");
  std::vector<std::size_t> leftover;
  g.layers(&leftover);
  if (!leftover.empty()) throw InvalidWorkflow("workflow '" + w.name + "': cycle in data edges");
}

} // namespace

std::string_view to_string(Modality m) { return lookup_name(kModalities, m); }
std::string_view to_string(Determinism d) {
  return d == Determinism::Deterministic ? "deterministic" : "stochastic";
}
std::string_view to_string(EdgeKind k) { return k == EdgeKind::Data ? "data" : "feedback"; }
std::string_view to_string(StructureLabel s) { return lookup_name(kLabels, s); }

std::optional<Modality> parse_modality(std::string_view s) { return lookup_value(kModalities, s); }
std::optional<Determinism> parse_determinism(std::string_view s) {
  if (s == "deterministic") return Determinism::Deterministic;
  if (s == "stochastic") return Determinism::Stochastic;
  return std::nullopt;
}
std::optional<EdgeKind> parse_edge_kind(std::string_view s) {
  if (s == "data") return EdgeKind::Data;
  if (s == "feedback") return EdgeKind::Feedback;
  return std::nullopt;
}
std::optional<StructureLabel> parse_structure_label(std::string_view s) { return lookup_value(kLabels, s); }

// ---------------------------------------------------------------------------
// Registry

Registry::Registry(std::vector<Capability> capabilities, std::vector<AgentSpec> agents)
    : capabilities_(std::move(capabilities)), agents_(std::move(agents)) {
  for (std::size_t i = 0; i < capabilities_.size(); ++i) {
    if (capabilities_[i].id.empty()) throw ConfigError("capability with empty id");
    if (!capability_index_.emplace(capabilities_[i].id, i).second)
      throw ConfigError("duplicate capability '" + capabilities_[i].id + "'");
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const auto& a = agents_[i];
    if (a.agent_id.empty()) throw ConfigError("agent with empty id");
    if (!capability_index_.contains(a.capability))
      throw ConfigError("agent '" + a.agent_id + "' names unknown capability '" + a.capability + "'");
    if (!agent_index_.emplace(a.agent_id, i).second) throw ConfigError("duplicate agent '" + a.agent_id + "'");
  }
}

const AgentSpec* Registry::find_agent(std::string_view id) const {
  auto it = agent_index_.find(std::string(id));
  return it == agent_index_.end() ? nullptr : &agents_[it->second];
}

const Capability* Registry::find_capability(std::string_view id) const {
  auto it = capability_index_.find(std::string(id));
  return it == capability_index_.end() ? nullptr : &capabilities_[it->second];
}

std::vector<const AgentSpec*> Registry::orchestrators() const {
  std::vector<const AgentSpec*> out;
  for (const auto& a : agents_)
    if (a.capability == kOrchestrationCapability) out.push_back(&a);
  std::sort(out.begin(), out.end(), [](auto* x, auto* y) { return x->agent_id < y->agent_id; });
  return out;
}

NodeWorkload workload_for(const AbstractWorkflow& w, const AgentSpec& agent) {
  auto it = w.workloads.find(agent.agent_id);
  return it == w.workloads.end() ? agent.default_workload : it->second;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::has(Violation::Kind k) const {
  return std::any_of(violations.begin(), violations.end(), [k](const auto& v) { return v.kind == k; });
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << '\n';
    os << violations[i].message;
  }
  return os.str();
}

ValidationReport validate(const AbstractWorkflow& w, const Registry& registry) {
  ValidationReport report;
  auto add = [&](Violation::Kind k, std::string msg) { report.violations.push_back({k, std::move(msg)}); };

  if (w.nodes.empty()) add(Violation::Kind::Empty, "workflow has no nodes");

  std::set<std::string> seen;
  for (const auto& n : w.nodes) {
    if (!seen.insert(n).second) add(Violation::Kind::DuplicateNode, "duplicate node '" + n + "'");
    if (!registry.find_agent(n)) add(Violation::Kind::UnknownAgent, "unknown agent '" + n + "'");
  }
  for (const auto& [id, _] : w.workloads)
    if (!seen.contains(id)) add(Violation::Kind::UnknownWorkload, "workload annotation for non-node '" + id + "'");

  for (const auto& e : w.edges) {
    const bool from_ok = seen.contains(e.from);
    const bool to_ok = seen.contains(e.to);
    if (!from_ok || !to_ok) {
      add(Violation::Kind::DanglingEdge, "dangling edge " + e.from + " -> " + e.to);
      continue;
    }
    if (e.kind != EdgeKind::Data || e.adapter) continue;
    const auto* src = registry.find_agent(e.from);
    const auto* dst = registry.find_agent(e.to);
    if (src && dst && src->output_role != dst->input_role)
      add(Violation::Kind::RoleMismatch, "role mismatch on " + e.from + " -> " + e.to + ": '" + src->output_role +
                                             "' does not feed '" + dst->input_role + "'");
  }

  DataGraph g(w);
  std::vector<std::size_t> leftover;
  g.layers(&leftover);
  if (!leftover.empty()) {
    std::string members;
    for (auto v : leftover) members += (members.empty() ? "" : ", ") + g.ids[v];
    add(Violation::Kind::Cycle, "cycle in data edges (involving " + members + ")");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ordering and classification

Layers topo_order(const AbstractWorkflow& w) {
  DataGraph g(w);
  require_acyclic(w, g);
  Layers result;
  for (const auto& layer : g.layers()) {
    auto& group = result.emplace_back();
    for (auto v : layer) group.push_back(g.ids[v]);
  }
  return result;
}

StructureLabel classify_structure(const AbstractWorkflow& w) {
  DataGraph g(w);
  require_acyclic(w, g);
  if (w.tag && tag_only_label(*w.tag)) return *w.tag;
  if (std::any_of(w.edges.begin(), w.edges.end(), [](const Edge& e) { return e.kind == EdgeKind::Feedback; }))
    return StructureLabel::FeedbackGraph;

  const std::size_t n = g.size();
  // Hub: a dispatching source adjacent to every other node, or a collecting
  // sink adjacent from every other node. Needs at least two spokes so a bare
  // edge or a path never qualifies.
  if (n >= 3) {
    for (std::size_t h = 0; h < n; ++h) {
      if ((g.in[h].empty() && g.out[h].size() == n - 1) || (g.out[h].empty() && g.in[h].size() == n - 1))
        return StructureLabel::OrchestratedDag;
    }
  }

  std::size_t edge_count = 0;
  bool max_in_one = true;
  bool max_out_one = true;
  std::size_t branching = 0;
  for (std::size_t v = 0; v < n; ++v) {
    edge_count += g.out[v].size();
    if (g.in[v].size() > 1) max_in_one = false;
    if (g.out[v].size() > 1) {
      max_out_one = false;
      ++branching;
    }
  }
  const bool connected = g.weakly_connected();
  if (connected && max_in_one && max_out_one && edge_count + 1 == n) return StructureLabel::Chain;
  if (connected && max_in_one && edge_count + 1 == n) {
    return branching == 1 ? StructureLabel::BranchingChain : StructureLabel::Tree;
  }
  return StructureLabel::Dag;
}

std::uint64_t canonical_hash(const AbstractWorkflow& w) {
  std::vector<std::string> nodes = w.nodes;
  std::sort(nodes.begin(), nodes.end());
  std::vector<Edge> edges = w.edges;
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::uint64_t h = fnv1a("workflow");
  for (const auto& n : nodes) h = hash_combine(h, fnv1a(n));
  h = hash_combine(h, 0x5eedULL);
  for (const auto& e : edges) {
    std::uint64_t eh = fnv1a(e.to, fnv1a(">", fnv1a(e.from)));
    eh = hash_combine(eh, static_cast<std::uint64_t>(e.kind) * 2 + (e.adapter ? 1 : 0));
    h = hash_combine(h, eh);
  }
  return h;
}

std::set<std::pair<std::string, std::string>> data_closure(const AbstractWorkflow& w,
                                                           const std::set<std::string>& excluded) {
  DataGraph g(w);
  std::set<std::pair<std::string, std::string>> closure;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (excluded.contains(g.ids[s])) continue;
    std::vector<bool> seen(g.size(), false);
    std::vector<std::size_t> stack{s};
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto v : g.out[u]) {
        if (seen[v] || excluded.contains(g.ids[v])) continue;
        seen[v] = true;
        closure.emplace(g.ids[s], g.ids[v]);
        stack.push_back(v);
      }
    }
  }
  return closure;
}

// ---------------------------------------------------------------------------
// Rewrites

namespace {

struct DropPlan {
  Edge dropped;
  std::string producer;  // replacement source feeding the target's input role
};

std::vector<DropPlan> droppable(const AbstractWorkflow& w, const Registry& registry) {
  DataGraph g(w);
  std::vector<std::size_t> depth(g.size(), 0);
  {
    auto layers = g.layers();
    for (std::size_t l = 0; l < layers.size(); ++l)
      for (auto v : layers[l]) depth[v] = l;
  }
  const auto closure = data_closure(w);
  std::vector<DropPlan> plans;
  std::set<Edge> unique_edges(w.edges.begin(), w.edges.end());
  for (const auto& e : unique_edges) {
    if (e.kind != EdgeKind::Data) continue;
    const auto* src = registry.find_agent(e.from);
    const auto* dst = registry.find_agent(e.to);
    if (!src || !dst || src->output_role == dst->input_role) continue;
    // Nearest data ancestor of the target that produces its input role.
    std::optional<std::size_t> best;
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto& pid = g.ids[p];
      if (pid == e.to || !closure.contains({pid, e.to})) continue;
      const auto* pa = registry.find_agent(pid);
      if (!pa || pa->output_role != dst->input_role) continue;
      if (!best || depth[p] > depth[*best]) best = p;
    }
    if (best) plans.push_back({e, g.ids[*best]});
  }
  return plans;
}

AbstractWorkflow apply_drops(const AbstractWorkflow& w, const std::vector<DropPlan>& plans, std::uint64_t mask) {
  AbstractWorkflow v = w;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (!(mask >> i & 1U)) continue;
    const auto& p = plans[i];
    std::erase(v.edges, p.dropped);
    const bool present = std::any_of(v.edges.begin(), v.edges.end(), [&](const Edge& e) {
      return e.kind == EdgeKind::Data && e.from == p.producer && e.to == p.dropped.to;
    });
    if (!present) v.edges.push_back({p.producer, p.dropped.to, EdgeKind::Data, false});
  }
  return v;
}

std::optional<AbstractWorkflow> with_hub(const AbstractWorkflow& w, const Registry& registry) {
  const auto orchestrators = registry.orchestrators();
  if (orchestrators.empty()) return std::nullopt;

  std::optional<std::string> hub;
  for (const auto& n : w.nodes) {
    const auto* a = registry.find_agent(n);
    if (a && a->capability == kOrchestrationCapability && (!hub || n < *hub)) hub = n;
  }
  AbstractWorkflow v = w;
  if (hub) {
    // An existing hub can only dispatch to everyone if nothing feeds it.
    const bool has_producer = std::any_of(w.edges.begin(), w.edges.end(), [&](const Edge& e) {
      return e.kind == EdgeKind::Data && e.to == *hub;
    });
    if (has_producer) return std::nullopt;
  } else {
    hub = orchestrators.front()->agent_id;
    v.nodes.push_back(*hub);
  }
  const auto* hub_agent = registry.find_agent(*hub);
  for (const auto& n : w.nodes) {
    if (n == *hub) continue;
    const bool present = std::any_of(v.edges.begin(), v.edges.end(), [&](const Edge& e) {
      return e.kind == EdgeKind::Data && e.from == *hub && e.to == n;
    });
    if (present) continue;
    const auto* target = registry.find_agent(n);
    const bool matches = target && hub_agent->output_role == target->input_role;
    v.edges.push_back({*hub, n, EdgeKind::Data, !matches});
  }
  return v;
}

} // namespace

std::vector<Edge> ordering_only_edges(const AbstractWorkflow& w, const Registry& registry) {
  std::vector<Edge> out;
  for (const auto& p : droppable(w, registry)) out.push_back(p.dropped);
  return out;
}

std::vector<AbstractWorkflow> rewrite_variants(const AbstractWorkflow& w, const Registry& registry,
                                               std::size_t max_variants) {
  if (auto report = validate(w, registry); !report.ok())
    throw InvalidWorkflow("cannot rewrite invalid workflow '" + w.name + "': " + report.to_string());
  max_variants = std::max<std::size_t>(max_variants, 1);

  // Subsets of droppable edges; more than this many droppable edges only
  // enumerates subsets of the first kMaxDroppable.
  constexpr std::size_t kMaxDroppable = 12;
  auto plans = droppable(w, registry);
  if (plans.size() > kMaxDroppable) plans.resize(kMaxDroppable);

  const std::uint64_t base_hash = canonical_hash(w);
  std::map<std::uint64_t, AbstractWorkflow> variants;
  auto add = [&](AbstractWorkflow v) {
    const auto h = canonical_hash(v);
    if (h != base_hash) variants.emplace(h, std::move(v));
  };

  const std::uint64_t subsets = std::uint64_t{1} << plans.size();
  for (std::uint64_t mask = 0; mask < subsets; ++mask) {
    AbstractWorkflow v = mask == 0 ? w : apply_drops(w, plans, mask);
    if (auto hubbed = with_hub(v, registry)) add(std::move(*hubbed));
    if (mask != 0) add(std::move(v));
  }

  std::vector<AbstractWorkflow> result{w};
  for (auto& [_, v] : variants) {
    if (result.size() >= max_variants) break;
    result.push_back(std::move(v));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Executable workflows

std::string Binding::key() const { return model ? engine + "/" + *model : engine; }

ExecutableWorkflow make_executable(AbstractWorkflow base, std::map<std::string, Binding> bindings) {
  ExecutableWorkflow ew;
  ew.order = topo_order(base);
  ew.base = std::move(base);
  ew.bindings = std::move(bindings);
  return ew;
}

std::uint64_t plan_hash(const ExecutableWorkflow& ew) {
  std::uint64_t h = canonical_hash(ew.base);
  for (const auto& [id, b] : ew.bindings) {
    std::uint64_t bh = fnv1a(id);
    bh = fnv1a(b.engine, bh ^ 0x01);
    bh = fnv1a(b.model.value_or("-"), bh ^ 0x02);
    h = hash_combine(h, bh);
  }
  return h;
}

ValidationReport validate_executable(const ExecutableWorkflow& ew, const Registry& registry) {
  ValidationReport report = validate(ew.base, registry);
  auto add = [&](Violation::Kind k, std::string msg) { report.violations.push_back({k, std::move(msg)}); };

  for (const auto& n : ew.base.nodes) {
    auto it = ew.bindings.find(n);
    if (it == ew.bindings.end()) {
      add(Violation::Kind::MissingBinding, "node '" + n + "' has no binding");
      continue;
    }
    const auto* a = registry.find_agent(n);
    if (!a) continue;
    const auto& b = it->second;
    if (b.engine.empty()) add(Violation::Kind::BindingShape, "node '" + n + "' has no engine");
    if (a->stochastic() && !b.model) add(Violation::Kind::BindingShape, "stochastic node '" + n + "' has no model");
    if (!a->stochastic() && b.model)
      add(Violation::Kind::BindingShape, "deterministic node '" + n + "' must not bind a model");
  }
  for (const auto& [id, _] : ew.bindings)
    if (std::find(ew.base.nodes.begin(), ew.base.nodes.end(), id) == ew.base.nodes.end())
      add(Violation::Kind::MissingBinding, "binding for non-node '" + id + "'");

  std::unordered_map<std::string, std::size_t> position;
  std::size_t placed = 0;
  for (std::size_t l = 0; l < ew.order.size(); ++l)
    for (const auto& n : ew.order[l]) {
      position[n] = l;
      ++placed;
    }
  if (placed != ew.base.nodes.size() || position.size() != placed)
    add(Violation::Kind::OrderViolation, "order does not cover every node exactly once");
  for (const auto& e : ew.base.edges) {
    if (e.kind != EdgeKind::Data) continue;
    auto f = position.find(e.from);
    auto t = position.find(e.to);
    if (f != position.end() && t != position.end() && f->second >= t->second)
      add(Violation::Kind::OrderViolation, "order places " + e.to + " before its producer " + e.from);
  }
  return report;
}

} // namespace agentplan
