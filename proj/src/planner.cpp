#include "agentplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "agentplan/hash.hpp"
#include "agentplan/kernels.hpp"

namespace agentplan {

// ---------------------------------------------------------------------------
// Dominance

bool dominates(const CostDistribution& u, const CostDistribution& v, const ObjectiveSet& o, double eps) {
  bool strict = false;
  for (auto d : o.dims()) {
    if (u.m(d) > v.m(d) + eps) return false;
    if (u.m(d) < v.m(d) - eps) strict = true;
  }
  return strict;
}

bool dominates(std::span<const double> u, std::span<const double> v, double eps) {
  if (u.size() != v.size()) throw std::invalid_argument("dominates: dimension mismatch");
  bool strict = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > v[i] + eps) return false;
    if (u[i] < v[i] - eps) strict = true;
  }
  return strict;
}

std::vector<std::size_t> nondominated(std::span<const std::vector<double>> points, double eps) {
  const std::size_t n = points.size();
  if (n == 0) return {};
  const std::size_t m = points.front().size();

  // Pass 1: archive of mutually non-dominated points. A point is discarded
  // only when something dominates it, so every truly non-dominated point
  // survives.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a] < points[b]; });
  std::vector<std::size_t> archive;
  for (auto i : order) {
    bool dominated = false;
    for (auto a : archive)
      if (dominates(points[a], points[i], eps)) {
        dominated = true;
        break;
      }
    if (dominated) continue;
    std::erase_if(archive, [&](auto a) { return dominates(points[i], points[a], eps); });
    archive.push_back(i);
  }

  // Pass 2: eps-dominance is not transitive, so re-check each survivor
  // against every point.
  std::vector<double> cols(m * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t d = 0; d < m; ++d) cols[d * n + j] = points[j][d];
  const kernels::CostColumns all{cols.data(), n, m, n};
  std::vector<std::size_t> result;
  for (auto a : archive)
    if (!kernels::any_dominates(all, points[a].data(), eps)) result.push_back(a);
  std::sort(result.begin(), result.end());
  return result;
}

// ---------------------------------------------------------------------------
// Frontier helpers

const FrontierEntry* ParetoFrontier::find(std::uint64_t plan_hash) const {
  for (const auto& e : entries)
    if (e.hash == plan_hash) return &e;
  return nullptr;
}

std::uint64_t ParetoFrontier::digest() const {
  std::uint64_t h = hash_combine(fnv1a("frontier"), objectives.mask());
  for (const auto& e : entries) {
    h = hash_combine(h, e.hash);
    for (auto d : objectives.dims()) {
      std::uint64_t bits;
      const double v = e.cost.m(d);
      std::memcpy(&bits, &v, sizeof bits);
      h = hash_combine(h, bits);
    }
  }
  return h;
}

namespace {

std::vector<double> project(const CostDistribution& c, const ObjectiveSet& o) {
  std::vector<double> out;
  out.reserve(o.size());
  for (auto d : o.dims()) out.push_back(c.m(d));
  return out;
}

void sort_frontier(std::vector<FrontierEntry>& entries, const ObjectiveSet& o) {
  std::sort(entries.begin(), entries.end(), [&](const FrontierEntry& a, const FrontierEntry& b) {
    for (auto d : o.dims()) {
      if (a.cost.m(d) < b.cost.m(d)) return true;
      if (b.cost.m(d) < a.cost.m(d)) return false;
    }
    return a.hash < b.hash;
  });
}

std::size_t collapse_ties(std::vector<FrontierEntry>& entries, const ObjectiveSet& o) {
  std::sort(entries.begin(), entries.end(), [](auto& a, auto& b) { return a.hash < b.hash; });
  std::vector<FrontierEntry> kept;
  std::size_t dropped = 0;
  for (auto& e : entries) {
    const bool tied = std::any_of(kept.begin(), kept.end(), [&](const FrontierEntry& k) {
      for (auto d : o.dims())
        if (std::abs(k.cost.m(d) - e.cost.m(d)) > kEps) return false;
      return true;
    });
    if (tied) {
      ++dropped;
      continue;
    }
    kept.push_back(std::move(e));
  }
  entries = std::move(kept);
  return dropped;
}

// Keeps the per-objective extremes, then greedily adds the entry farthest
// (min-max normalized) from everything kept so far.
std::size_t truncate_frontier(std::vector<FrontierEntry>& entries, const ObjectiveSet& o, std::size_t max_frontier) {
  if (max_frontier == 0 || entries.size() <= max_frontier) return 0;
  const std::size_t n = entries.size();
  std::vector<double> lo(o.size(), std::numeric_limits<double>::infinity());
  std::vector<double> hi(o.size(), -std::numeric_limits<double>::infinity());
  for (const auto& e : entries)
    for (std::size_t k = 0; k < o.size(); ++k) {
      lo[k] = std::min(lo[k], e.cost.m(o.dims()[k]));
      hi[k] = std::max(hi[k], e.cost.m(o.dims()[k]));
    }
  auto norm = [&](std::size_t i, std::size_t k) {
    const double span = hi[k] - lo[k];
    return span <= kEps ? 0.0 : (entries[i].cost.m(o.dims()[k]) - lo[k]) / span;
  };

  std::vector<bool> chosen(n, false);
  std::vector<std::size_t> picked;
  for (std::size_t k = 0; k < o.size() && picked.size() < max_frontier; ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (entries[i].cost.m(o.dims()[k]) < entries[best].cost.m(o.dims()[k])) best = i;
    if (!chosen[best]) {
      chosen[best] = true;
      picked.push_back(best);
    }
  }
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  auto refresh = [&](std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0;
      for (std::size_t k = 0; k < o.size(); ++k) {
        const double diff = norm(i, k) - norm(p, k);
        d2 += diff * diff;
      }
      nearest[i] = std::min(nearest[i], d2);
    }
  };
  for (auto p : picked) refresh(p);
  while (picked.size() < max_frontier) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i)
      if (!chosen[i] && (!best || nearest[i] > nearest[*best])) best = i;
    if (!best) break;
    chosen[*best] = true;
    picked.push_back(*best);
    refresh(*best);
  }
  std::vector<FrontierEntry> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (chosen[i]) kept.push_back(std::move(entries[i]));
  entries = std::move(kept);
  return n - entries.size();
}

ParetoFrontier finalize(std::vector<FrontierEntry> candidates, const ObjectiveSet& o, const PlannerOptions& opts,
                        std::optional<StructureLabel> source_label) {
  ParetoFrontier f = pareto_filter(std::move(candidates), o);
  f.source_label = source_label;
  if (opts.collapse_ties) f.tie_collapsed = collapse_ties(f.entries, o);
  f.truncated = truncate_frontier(f.entries, o, opts.max_frontier);
  sort_frontier(f.entries, o);
  return f;
}

} // namespace

ParetoFrontier pareto_filter(std::vector<FrontierEntry> candidates, const ObjectiveSet& o) {
  std::vector<std::vector<double>> pts;
  pts.reserve(candidates.size());
  for (const auto& c : candidates) pts.push_back(project(c.cost, o));
  ParetoFrontier f;
  f.objectives = o;
  for (auto i : nondominated(pts)) f.entries.push_back(std::move(candidates[i]));
  sort_frontier(f.entries, o);
  return f;
}

SpaceTooLarge::SpaceTooLarge(std::uint64_t size, std::uint64_t limit)
    : PlanningFault("search space of " + std::to_string(size) + " plans exceeds the brute-force limit of " +
                    std::to_string(limit)),
      size_(size) {}

// ---------------------------------------------------------------------------
// Enumeration with prefix pruning

namespace {

struct NodeChoices {
  std::string id;
  bool layer_start = false;
  std::vector<Binding> bindings;
  std::vector<CostDistribution> costs;
};

struct VariantSpace {
  const AbstractWorkflow* w = nullptr;
  Layers layers;
  std::vector<NodeChoices> nodes;  // flattened layer order
  StructureLabel label = StructureLabel::Dag;
};

double hub_surcharge(const AbstractWorkflow& w, const AgentSpec& a, const PlannerOptions& opts) {
  if (opts.hub_edge_latency_ms == 0.0 || a.capability != kOrchestrationCapability) return 0.0;
  const auto fanout = std::count_if(w.edges.begin(), w.edges.end(), [&](const Edge& e) {
    return e.kind == EdgeKind::Data && e.from == a.agent_id;
  });
  return opts.hub_edge_latency_ms * static_cast<double>(fanout);
}

VariantSpace build_space(const AbstractWorkflow& w, const PlanningInputs& in, const PlannerOptions& opts,
                         const std::map<std::string, Binding>* frozen,
                         const std::map<std::string, CostDistribution>* realized) {
  VariantSpace s;
  s.w = &w;
  s.layers = topo_order(w);
  s.label = classify_structure(w);
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    for (std::size_t i = 0; i < s.layers[l].size(); ++i) {
      const auto& id = s.layers[l][i];
      const auto* agent = in.registry.find_agent(id);
      if (!agent) throw PlanningFault("unknown agent '" + id + "'");
      NodeChoices nc;
      nc.id = id;
      nc.layer_start = i == 0;
      if (frozen && frozen->contains(id)) {
        nc.bindings = {frozen->at(id)};
      } else {
        nc.bindings = candidate_bindings(*agent, in.pools);
        if (nc.bindings.empty())
          throw PlanningFault("agent '" + id + "' is unsatisfiable: no model/engine in the pools supports '" +
                              agent->capability + "'");
      }
      const auto wl = workload_for(w, *agent);
      for (const auto& b : nc.bindings) {
        if (realized && realized->contains(id)) {
          nc.costs.push_back(realized->at(id));
          continue;
        }
        auto c = estimate_node(*agent, b, wl, in.pools, in.stats);
        c.m(Dim::Latency) += hub_surcharge(w, *agent, opts);
        nc.costs.push_back(c);
      }
      s.nodes.push_back(std::move(nc));
    }
  }
  return s;
}

// Partial plan over the first k nodes of the flattened order. Latency is
// tracked as (closed layers, running max of the open layer) so that
// dominance on the pair carries over to every completion.
struct Partial {
  std::vector<std::uint32_t> picks;
  double closed = 0.0;
  double open = 0.0;
  double money = 0.0;
  double tokens = 0.0;
  double energy = 0.0;
  double survival = 1.0;

  double latency_lb() const { return closed + open; }
};

struct PruneContext {
  const ObjectiveSet& o;
  double rest_survival_min = 1.0;  // lower bound on survival of the remaining nodes
};

// a's completions dominate b's completions (same suffix) in the final
// eps-dominance sense.
bool prunes(const Partial& a, const Partial& b, const PruneContext& ctx) {
  bool strict = false;
  for (auto d : ctx.o.dims()) {
    switch (d) {
      case Dim::Latency: {
        if (a.closed > b.closed + kEps || a.latency_lb() > b.latency_lb() + kEps) return false;
        if (a.closed < b.closed - kEps && a.latency_lb() < b.latency_lb() - kEps) strict = true;
        break;
      }
      case Dim::Error: {
        const double ea = 1.0 - a.survival;
        const double eb = 1.0 - b.survival;
        if (ea > eb + kEps) return false;
        if ((a.survival - b.survival) * ctx.rest_survival_min > kEps) strict = true;
        break;
      }
      default: {
        const double x = d == Dim::Monetary ? a.money : d == Dim::Tokens ? a.tokens : a.energy;
        const double y = d == Dim::Monetary ? b.money : d == Dim::Tokens ? b.tokens : b.energy;
        if (x > y + kEps) return false;
        if (x < y - kEps) strict = true;
      }
    }
  }
  return strict;
}

// A complete plan whose cost dominates the partial's lower bound dominates
// every completion of that partial.
bool incumbent_prunes(const CostDistribution& inc, const Partial& p, const ObjectiveSet& o) {
  bool strict = false;
  for (auto d : o.dims()) {
    double lb = 0;
    switch (d) {
      case Dim::Latency: lb = p.latency_lb(); break;
      case Dim::Monetary: lb = p.money; break;
      case Dim::Tokens: lb = p.tokens; break;
      case Dim::Energy: lb = p.energy; break;
      case Dim::Error: lb = 1.0 - p.survival; break;
    }
    if (inc.m(d) > lb + kEps) return false;
    if (inc.m(d) < lb - kEps) strict = true;
  }
  return strict;
}

CostDistribution cost_of(const VariantSpace& s, const std::vector<std::uint32_t>& picks) {
  std::map<std::string, const CostDistribution*> by_id;
  for (std::size_t k = 0; k < s.nodes.size(); ++k) by_id[s.nodes[k].id] = &s.nodes[k].costs[picks[k]];
  return compose_layers(s.layers, [&](const std::string& id) -> const CostDistribution& { return *by_id.at(id); });
}

std::vector<std::vector<std::uint32_t>> enumerate_pruned(const VariantSpace& s, const ObjectiveSet& o,
                                                         const std::vector<CostDistribution>& incumbents) {
  const std::size_t n = s.nodes.size();
  std::vector<double> rest_min(n + 1, 1.0);
  for (std::size_t k = n; k-- > 0;) {
    double worst = 1.0;
    for (const auto& c : s.nodes[k].costs) worst = std::min(worst, 1.0 - c.m(Dim::Error));
    rest_min[k] = rest_min[k + 1] * std::max(worst, 0.0);
  }

  std::vector<Partial> partials(1);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& node = s.nodes[k];
    std::vector<Partial> next;
    next.reserve(partials.size() * node.costs.size());
    for (auto& p : partials) {
      if (node.layer_start && k > 0) {
        p.closed += p.open;
        p.open = 0.0;
      }
      for (std::uint32_t j = 0; j < node.costs.size(); ++j) {
        const auto& c = node.costs[j];
        Partial q = p;
        q.picks.push_back(j);
        q.open = std::max(q.open, c.m(Dim::Latency));
        q.money += c.m(Dim::Monetary);
        q.tokens += c.m(Dim::Tokens);
        q.energy += c.m(Dim::Energy);
        q.survival *= 1.0 - c.m(Dim::Error);
        next.push_back(std::move(q));
      }
    }

    // The open layer stays open until the next layer starts, so pruning uses
    // the survival bound of everything after node k.
    PruneContext ctx{o, rest_min[k + 1]};
    std::vector<bool> dead(next.size(), false);
    for (std::size_t i = 0; i < next.size(); ++i)
      for (const auto& inc : incumbents)
        if (incumbent_prunes(inc, next[i], o)) {
          dead[i] = true;
          break;
        }
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (dead[i]) continue;
      for (std::size_t j = 0; j < next.size(); ++j) {
        if (i == j) continue;
        if (prunes(next[j], next[i], ctx)) {
          dead[i] = true;
          break;
        }
      }
    }
    partials.clear();
    for (std::size_t i = 0; i < next.size(); ++i)
      if (!dead[i]) partials.push_back(std::move(next[i]));
  }

  std::vector<std::vector<std::uint32_t>> complete;
  complete.reserve(partials.size());
  for (auto& p : partials) complete.push_back(std::move(p.picks));
  return complete;
}

FrontierEntry materialize(const VariantSpace& s, const std::vector<std::uint32_t>& picks, const Layers* layers = nullptr) {
  FrontierEntry e;
  e.plan.base = *s.w;
  e.plan.order = layers ? *layers : s.layers;
  for (std::size_t k = 0; k < s.nodes.size(); ++k) e.plan.bindings[s.nodes[k].id] = s.nodes[k].bindings[picks[k]];
  e.cost = cost_of(s, picks);
  e.hash = plan_hash(e.plan);
  e.structure = s.label;
  return e;
}

std::vector<FrontierEntry> plan_variant(const VariantSpace& s, const ObjectiveSet& o, const PlanningInputs& in,
                                        const PlannerOptions& opts) {
  std::vector<CostDistribution> incumbents;
  std::optional<PlanSignature> sig;
  if (opts.cache) {
    sig = plan_signature(*s.w, in.registry);
    if (auto fragments = opts.cache->get_plan(sig->value)) {
      for (const auto& f : *fragments) {
        auto bindings = apply_fragment(f, *s.w, in.registry, *sig);
        if (!bindings) continue;
        std::vector<std::uint32_t> picks;
        for (const auto& node : s.nodes) {
          auto it = std::find(node.bindings.begin(), node.bindings.end(), bindings->at(node.id));
          if (it == node.bindings.end()) break;
          picks.push_back(static_cast<std::uint32_t>(it - node.bindings.begin()));
        }
        if (picks.size() == s.nodes.size()) incumbents.push_back(cost_of(s, picks));
      }
    }
  }

  std::vector<FrontierEntry> entries;
  for (const auto& picks : enumerate_pruned(s, o, incumbents)) entries.push_back(materialize(s, picks));

  if (opts.cache && sig) {
    auto local = pareto_filter(entries, o);
    std::vector<PlanFragment> fragments;
    constexpr std::size_t kMaxFragments = 16;
    for (const auto& e : local.entries) {
      if (fragments.size() >= kMaxFragments) break;
      fragments.push_back(make_fragment(e.plan.bindings, *s.w, in.registry, *sig, e.cost));
    }
    opts.cache->put_plan(sig->value, std::move(fragments));
  }
  return entries;
}

void check_satisfiable(const AbstractWorkflow& w, const PlanningInputs& in) {
  for (const auto& n : w.nodes) {
    const auto* a = in.registry.find_agent(n);
    if (a && candidate_bindings(*a, in.pools).empty())
      throw PlanningFault("agent '" + n + "' is unsatisfiable: no model/engine in the pools supports '" +
                          a->capability + "'");
  }
}

std::vector<AbstractWorkflow> planning_variants(const AbstractWorkflow& w, const PlanningInputs& in,
                                                const PlannerOptions& opts) {
  if (auto report = validate(w, in.registry); !report.ok())
    throw InvalidWorkflow("workflow '" + w.name + "' is invalid: " + report.to_string());
  auto variants = rewrite_variants(w, in.registry, opts.max_variants);
  for (const auto& v : variants) check_satisfiable(v, in);
  return variants;
}

} // namespace

ParetoFrontier optimize(const AbstractWorkflow& w, const ObjectiveSet& o, const PlanningInputs& in,
                        const PlannerOptions& opts) {
  const auto variants = planning_variants(w, in, opts);
  std::vector<FrontierEntry> all;
  for (const auto& v : variants) {
    auto space = build_space(v, in, opts, nullptr, nullptr);
    auto entries = plan_variant(space, o, in, opts);
    std::move(entries.begin(), entries.end(), std::back_inserter(all));
  }
  return finalize(std::move(all), o, opts, classify_structure(w));
}

namespace {

// Mixed-radix enumeration of one fixed structure; every plan goes through
// estimate_workflow.
void enumerate_all(const AbstractWorkflow& v, const std::vector<std::vector<Binding>>& choices,
                   const std::vector<std::string>& ids, const ObjectiveSet& o, const PlanningInputs& in,
                   const WorkflowCostOptions& cost_opts, std::vector<FrontierEntry>& out) {
  ExecutableWorkflow ew;
  ew.base = v;
  ew.order = topo_order(v);
  const auto label = classify_structure(v);
  std::vector<std::size_t> digit(ids.size(), 0);
  std::vector<std::vector<double>> points;
  std::vector<std::vector<std::size_t>> picks;
  std::vector<CostDistribution> costs;
  while (true) {
    for (std::size_t k = 0; k < ids.size(); ++k) ew.bindings[ids[k]] = choices[k][digit[k]];
    auto c = estimate_workflow(ew, in.registry, in.pools, cost_opts);
    points.push_back(project(c, o));
    costs.push_back(c);
    picks.push_back(digit);
    std::size_t k = 0;
    while (k < ids.size() && ++digit[k] == choices[k].size()) digit[k++] = 0;
    if (k == ids.size()) break;
  }
  for (auto i : nondominated(points)) {
    FrontierEntry e;
    e.plan.base = v;
    e.plan.order = ew.order;
    for (std::size_t k = 0; k < ids.size(); ++k) e.plan.bindings[ids[k]] = choices[k][picks[i][k]];
    e.cost = costs[i];
    e.hash = plan_hash(e.plan);
    e.structure = label;
    out.push_back(std::move(e));
  }
}

} // namespace

ParetoFrontier brute_force(const AbstractWorkflow& w, const ObjectiveSet& o, const PlanningInputs& in,
                           const PlannerOptions& opts) {
  const auto variants = planning_variants(w, in, opts);
  const auto size = space_size(variants, in.registry, in.pools);
  if (size.overflow || size.count > opts.brute_force_limit)
    throw SpaceTooLarge(size.overflow ? std::numeric_limits<std::uint64_t>::max() : size.count,
                        opts.brute_force_limit);

  WorkflowCostOptions cost_opts{in.stats, nullptr, opts.hub_edge_latency_ms};
  std::vector<FrontierEntry> all;
  for (const auto& v : variants) {
    std::vector<std::string> ids = v.nodes;
    std::vector<std::vector<Binding>> choices;
    for (const auto& id : ids) choices.push_back(candidate_bindings(*in.registry.find_agent(id), in.pools));
    enumerate_all(v, choices, ids, o, in, cost_opts, all);
  }
  PlannerOptions final_opts = opts;
  final_opts.max_frontier = 0;
  return finalize(std::move(all), o, final_opts, classify_structure(w));
}

// ---------------------------------------------------------------------------
// Re-optimization

namespace {

void check_done(const ExecutableWorkflow& ew, const std::set<std::string>& done) {
  for (const auto& d : done)
    if (std::find(ew.base.nodes.begin(), ew.base.nodes.end(), d) == ew.base.nodes.end())
      throw PlanningFault("completed node '" + d + "' is not part of the workflow");
  for (const auto& e : ew.base.edges)
    if (e.kind == EdgeKind::Data && done.contains(e.to) && !done.contains(e.from))
      throw PlanningFault("completed set is not closed under data ancestry: '" + e.to + "' is done but its producer '" +
                          e.from + "' is not");
  for (const auto& d : done)
    if (!ew.bindings.contains(d)) throw PlanningFault("completed node '" + d + "' has no binding");
}

} // namespace

ParetoFrontier reoptimize(const ExecutableWorkflow& ew, const std::set<std::string>& done,
                          const std::map<std::string, CostDistribution>& realized, const ObjectiveSet& o,
                          const PlanningInputs& in, const PlannerOptions& opts) {
  check_done(ew, done);
  if (done.empty()) return optimize(ew.base, o, in, opts);

  std::map<std::string, Binding> frozen;
  std::map<std::string, CostDistribution> frozen_costs;
  for (const auto& d : done) {
    frozen[d] = ew.bindings.at(d);
    if (auto it = realized.find(d); it != realized.end()) frozen_costs[d] = it->second;
  }
  auto space = build_space(ew.base, in, opts, &frozen, &frozen_costs);
  PlannerOptions local = opts;
  local.cache = nullptr;  // fragments of partially executed plans are not reusable
  auto entries = plan_variant(space, o, in, local);
  return finalize(std::move(entries), o, opts, classify_structure(ew.base));
}

// ---------------------------------------------------------------------------
// Selection

namespace {

double value_of(const CostDistribution& c, Dim d, double lambda) {
  return lambda == 0.0 ? c.m(d) : c.m(d) + lambda * std::sqrt(std::max(0.0, c.v(d)));
}

double violation(const CostDistribution& c, const SelectionPolicy& p) {
  double total = 0.0;
  for (const auto& [d, budget] : p.budgets) {
    const double v = value_of(c, d, p.robust_lambda);
    if (v > budget + kEps) total += (v - budget) / std::max(std::abs(budget), kEps);
  }
  return total;
}

struct Ranges {
  std::array<double, kDims> lo{};
  std::array<double, kDims> hi{};
};

Ranges ranges_of(std::span<const CostDistribution> costs, double lambda) {
  Ranges r;
  r.lo.fill(std::numeric_limits<double>::infinity());
  r.hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& c : costs)
    for (auto d : kAllDims) {
      const double v = value_of(c, d, lambda);
      r.lo[idx(d)] = std::min(r.lo[idx(d)], v);
      r.hi[idx(d)] = std::max(r.hi[idx(d)], v);
    }
  return r;
}

double weighted_score(const CostDistribution& c, const SelectionPolicy& p, const Ranges& r) {
  double s = 0.0;
  for (const auto& [d, w] : p.weights) {
    const double span = r.hi[idx(d)] - r.lo[idx(d)];
    if (span <= kEps) continue;
    s += w * (value_of(c, d, p.robust_lambda) - r.lo[idx(d)]) / span;
  }
  return s;
}

std::string dims_csv(const std::vector<Dim>& dims) {
  std::string s;
  for (auto d : dims) {
    if (!s.empty()) s += ',';
    s += dim_name(d);
  }
  return s;
}

} // namespace

SelectionPolicy SelectionPolicy::weighted(std::map<Dim, double> weights) {
  SelectionPolicy p;
  p.kind = Kind::Weighted;
  p.weights = std::move(weights);
  return p;
}

SelectionPolicy SelectionPolicy::lexicographic(std::vector<Dim> priority) {
  SelectionPolicy p;
  p.kind = Kind::Lexicographic;
  p.priority = std::move(priority);
  return p;
}

SelectionPolicy SelectionPolicy::constrained(std::map<Dim, double> budgets, Dim target) {
  SelectionPolicy p;
  p.kind = Kind::Constrained;
  p.budgets = std::move(budgets);
  p.target = target;
  return p;
}

SelectionPolicy SelectionPolicy::balanced(const ObjectiveSet& o) {
  std::map<Dim, double> w;
  for (auto d : o.dims()) w[d] = 1.0 / static_cast<double>(o.size());
  return weighted(std::move(w));
}

SelectionPolicy SelectionPolicy::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("policy must look like <kind>:<args>");
  const auto kind = text.substr(0, colon);
  std::vector<std::string> args;
  {
    std::string rest(text.substr(colon + 1));
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(' '));
      tok.erase(tok.find_last_not_of(' ') + 1);
      if (!tok.empty()) args.push_back(tok);
    }
  }
  auto need_dim = [](std::string_view s) {
    auto d = parse_dim(s);
    if (!d) throw std::invalid_argument("unknown objective '" + std::string(s) + "' in policy");
    return *d;
  };
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw std::invalid_argument("bad number '" + s + "' in policy");
    return v;
  };

  SelectionPolicy p;
  std::optional<Dim> target;
  for (const auto& a : args) {
    if (a.rfind("lambda=", 0) == 0) {
      p.robust_lambda = number(a.substr(7));
      continue;
    }
    if (kind == "weighted") {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("weighted policy expects name=weight");
      p.weights[need_dim(a.substr(0, eq))] = number(a.substr(eq + 1));
    } else if (kind == "lexicographic" || kind == "lex") {
      p.priority.push_back(need_dim(a));
    } else if (kind == "constrained") {
      if (a.rfind("min=", 0) == 0) {
        target = need_dim(a.substr(4));
        continue;
      }
      const auto le = a.find("<=");
      if (le == std::string::npos) throw std::invalid_argument("constrained policy expects name<=budget or min=name");
      p.budgets[need_dim(a.substr(0, le))] = number(a.substr(le + 2));
    } else {
      throw std::invalid_argument("unknown policy kind '" + std::string(kind) + "'");
    }
  }
  if (kind == "weighted") {
    p.kind = Kind::Weighted;
    if (p.weights.empty()) throw std::invalid_argument("weighted policy needs at least one weight");
  } else if (kind == "lexicographic" || kind == "lex") {
    p.kind = Kind::Lexicographic;
    if (p.priority.empty()) throw std::invalid_argument("lexicographic policy needs an objective order");
  } else {
    p.kind = Kind::Constrained;
    if (!target) throw std::invalid_argument("constrained policy needs min=<objective>");
    p.target = *target;
  }
  return p;
}

std::string SelectionPolicy::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::Weighted: {
      os << "weighted:";
      bool first = true;
      for (const auto& [d, w] : weights) {
        os << (first ? "" : ",") << dim_name(d) << '=' << w;
        first = false;
      }
      break;
    }
    case Kind::Lexicographic: os << "lexicographic:" << dims_csv(priority); break;
    case Kind::Constrained: {
      os << "constrained:";
      for (const auto& [d, b] : budgets) os << dim_name(d) << "<=" << b << ',';
      os << "min=" << dim_name(target);
      break;
    }
  }
  if (robust_lambda != 0.0) os << ",lambda=" << robust_lambda;
  return os.str();
}

void SelectionPolicy::check(const ObjectiveSet& o) const {
  auto need = [&](Dim d) {
    if (!o.contains(d))
      throw std::invalid_argument("policy references objective '" + std::string(dim_name(d)) +
                                  "' outside the objective set");
  };
  if (robust_lambda < 0) throw std::invalid_argument("robust lambda must be >= 0");
  switch (kind) {
    case Kind::Weighted: {
      double sum = 0;
      for (const auto& [d, w] : weights) {
        need(d);
        if (w < 0) throw std::invalid_argument("weights must be non-negative");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to 1");
      break;
    }
    case Kind::Lexicographic:
      for (auto d : priority) need(d);
      break;
    case Kind::Constrained:
      for (const auto& [d, _] : budgets) need(d);
      need(target);
      break;
  }
}

int compare_under_policy(const CostDistribution& a, const CostDistribution& b, const SelectionPolicy& p,
                         std::span<const CostDistribution> reference) {
  const double lambda = p.robust_lambda;
  switch (p.kind) {
    case SelectionPolicy::Kind::Weighted: {
      std::vector<CostDistribution> pool(reference.begin(), reference.end());
      pool.push_back(a);
      pool.push_back(b);
      const auto r = ranges_of(pool, lambda);
      const double sa = weighted_score(a, p, r);
      const double sb = weighted_score(b, p, r);
      if (sa < sb - kEps) return -1;
      if (sb < sa - kEps) return 1;
      return 0;
    }
    case SelectionPolicy::Kind::Lexicographic:
      for (auto d : p.priority) {
        const double va = value_of(a, d, lambda);
        const double vb = value_of(b, d, lambda);
        if (va < vb - kEps) return -1;
        if (vb < va - kEps) return 1;
      }
      return 0;
    case SelectionPolicy::Kind::Constrained: {
      const double xa = violation(a, p);
      const double xb = violation(b, p);
      if (xa == 0.0 && xb > 0.0) return -1;
      if (xb == 0.0 && xa > 0.0) return 1;
      if (xa > 0.0 && xb > 0.0) return xa < xb ? -1 : xb < xa ? 1 : 0;
      const double va = value_of(a, p.target, lambda);
      const double vb = value_of(b, p.target, lambda);
      if (va < vb - kEps) return -1;
      if (vb < va - kEps) return 1;
      return 0;
    }
  }
  return 0;
}

namespace {

const FrontierEntry& select_uncached(const ParetoFrontier& f, const SelectionPolicy& p) {
  const double lambda = p.robust_lambda;
  std::vector<const FrontierEntry*> pool;
  for (const auto& e : f.entries) pool.push_back(&e);
  auto by_hash = [](const FrontierEntry* a, const FrontierEntry* b) { return a->hash < b->hash; };

  switch (p.kind) {
    case SelectionPolicy::Kind::Weighted: {
      std::vector<CostDistribution> costs;
      for (auto* e : pool) costs.push_back(e->cost);
      const auto r = ranges_of(costs, lambda);
      const FrontierEntry* best = nullptr;
      double best_score = 0;
      for (auto* e : pool) {
        const double s = weighted_score(e->cost, p, r);
        if (!best || s < best_score - kEps || (std::abs(s - best_score) <= kEps && e->hash < best->hash)) {
          best = e;
          best_score = s;
        }
      }
      return *best;
    }
    case SelectionPolicy::Kind::Lexicographic: {
      for (auto d : p.priority) {
        double lo = std::numeric_limits<double>::infinity();
        for (auto* e : pool) lo = std::min(lo, value_of(e->cost, d, lambda));
        std::erase_if(pool, [&](const FrontierEntry* e) { return value_of(e->cost, d, lambda) > lo + kEps; });
      }
      return **std::min_element(pool.begin(), pool.end(), by_hash);
    }
    case SelectionPolicy::Kind::Constrained: {
      std::vector<const FrontierEntry*> feasible;
      for (auto* e : pool)
        if (violation(e->cost, p) == 0.0) feasible.push_back(e);
      if (feasible.empty()) {
        std::sort(pool.begin(), pool.end(), [&](auto* a, auto* b) {
          const double va = violation(a->cost, p);
          const double vb = violation(b->cost, p);
          return va != vb ? va < vb : a->hash < b->hash;
        });
        std::ostringstream os;
        os << "no frontier plan meets the budgets; nearest misses:";
        for (std::size_t i = 0; i < std::min<std::size_t>(3, pool.size()); ++i) {
          os << "\n  plan " << to_hex(pool[i]->hash) << ":";
          for (const auto& [d, b] : p.budgets)
            os << ' ' << dim_name(d) << '=' << value_of(pool[i]->cost, d, lambda) << " (budget " << b << ')';
        }
        throw InfeasibleConstraints(os.str());
      }
      const FrontierEntry* best = nullptr;
      for (auto* e : feasible) {
        if (!best) {
          best = e;
          continue;
        }
        const double v = value_of(e->cost, p.target, lambda);
        const double bv = value_of(best->cost, p.target, lambda);
        if (v < bv - kEps || (std::abs(v - bv) <= kEps && e->hash < best->hash)) best = e;
      }
      return *best;
    }
  }
  throw PlanningFault("unknown selection policy");
}

} // namespace

const FrontierEntry& select(const ParetoFrontier& f, const SelectionPolicy& p, MMCache* cache) {
  if (f.empty()) throw PlanningFault("cannot select from an empty frontier");
  p.check(f.objectives);

  std::optional<std::uint64_t> context;
  if (cache && f.source_label) {
    std::uint64_t h = fnv1a(to_string(*f.source_label), fnv1a("policy-context"));
    h = hash_combine(h, f.objectives.mask());
    h = hash_combine(h, fnv1a(p.to_string()));
    context = h;
    if (auto hit = cache->get_policy(h)) {
      const auto* remembered = f.find(hit->plan_hash);
      if (!remembered)
        cache->record_stale_policy();
      else if (hit->frontier_digest == f.digest())
        return *remembered;
    }
  }
  const auto& chosen = select_uncached(f, p);
  if (context) cache->put_policy(*context, {chosen.hash, f.digest()});
  return chosen;
}

} // namespace agentplan
