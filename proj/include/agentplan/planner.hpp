#pragma once

// Multi-objective planning: dominance, Pareto filtering, exact enumeration
// with prefix dominance pruning, the brute-force oracle, selection policies
// and suffix re-optimization.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agentplan/cost_model.hpp"
#include "agentplan/error.hpp"
#include "agentplan/mmcache.hpp"
#include "agentplan/search_space.hpp"
#include "agentplan/workflow.hpp"

namespace agentplan {

/// Float tolerance for dominance and ties.
inline constexpr double kEps = 1e-9;

/// u dominates v: u <= v + eps on every objective and u < v - eps on one.
bool dominates(const CostDistribution& u, const CostDistribution& v, const ObjectiveSet& o, double eps = kEps);

/// Same relation on plain vectors of equal length (all coordinates count).
bool dominates(std::span<const double> u, std::span<const double> v, double eps = kEps);

/// Indices of the non-dominated points, ascending. Points with identical
/// vectors are all kept.
std::vector<std::size_t> nondominated(std::span<const std::vector<double>> points, double eps = kEps);

struct FrontierEntry {
  ExecutableWorkflow plan;
  CostDistribution cost;
  std::uint64_t hash = 0;
  StructureLabel structure = StructureLabel::Dag;
};

struct ParetoFrontier {
  ObjectiveSet objectives = ObjectiveSet::all();
  /// Sorted by objective means lexicographically, then plan hash.
  std::vector<FrontierEntry> entries;
  /// Structure label of the abstract workflow that was planned.
  std::optional<StructureLabel> source_label;
  /// Entries removed by max_frontier truncation.
  std::size_t truncated = 0;
  /// Entries removed because another plan had the same cost (within eps).
  std::size_t tie_collapsed = 0;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  const FrontierEntry* find(std::uint64_t plan_hash) const;
  /// Hash over plan hashes and objective means; identifies a frontier.
  std::uint64_t digest() const;
};

/// Exactly the non-dominated subset of `candidates` (ties by cost keep every
/// distinct plan), in frontier order.
ParetoFrontier pareto_filter(std::vector<FrontierEntry> candidates, const ObjectiveSet& o);

struct PlannerOptions {
  std::size_t max_variants = 8;
  /// 0 = unbounded.
  std::size_t max_frontier = 0;
  /// Keep one plan (smallest hash) per group of cost-identical plans.
  bool collapse_ties = true;
  double hub_edge_latency_ms = 0.0;
  /// Plan-fragment cache consulted per structure variant; never changes
  /// results, only prunes earlier.
  MMCache* cache = nullptr;
  /// brute_force refuses larger spaces.
  std::uint64_t brute_force_limit = 100000;
};

struct PlanningInputs {
  const Registry& registry;
  const Pools& pools;
  const Statistics* stats = nullptr;
};

/// Thrown by brute_force when the space exceeds its limit.
class SpaceTooLarge : public PlanningFault {
 public:
  SpaceTooLarge(std::uint64_t size, std::uint64_t limit);
  std::uint64_t size() const { return size_; }

 private:
  std::uint64_t size_;
};

/// Thrown by select under a constrained policy no plan satisfies.
class InfeasibleConstraints : public PlanningFault {
 public:
  using PlanningFault::PlanningFault;
};

ParetoFrontier optimize(const AbstractWorkflow& w, const ObjectiveSet& o, const PlanningInputs& in,
                        const PlannerOptions& opts = {});

/// Exhaustive oracle: every plan of every variant through estimate_workflow,
/// then pareto_filter (and tie collapse when enabled).
ParetoFrontier brute_force(const AbstractWorkflow& w, const ObjectiveSet& o, const PlanningInputs& in,
                           const PlannerOptions& opts = {});

// ---------------------------------------------------------------------------
// Selection

struct SelectionPolicy {
  enum class Kind { Weighted, Lexicographic, Constrained };
  Kind kind = Kind::Weighted;
  std::map<Dim, double> weights;
  std::vector<Dim> priority;
  std::map<Dim, double> budgets;
  Dim target = Dim::Latency;
  /// Scores use mean + lambda * sqrt(variance); 0 = means only.
  double robust_lambda = 0.0;

  static SelectionPolicy weighted(std::map<Dim, double> weights);
  static SelectionPolicy lexicographic(std::vector<Dim> priority);
  static SelectionPolicy constrained(std::map<Dim, double> budgets, Dim target);
  /// Equal weights over the objective set.
  static SelectionPolicy balanced(const ObjectiveSet& o);

  /// "weighted:latency=0.5,monetary=0.5" | "lexicographic:error,latency" |
  /// "constrained:monetary<=2,min=latency". Throws std::invalid_argument.
  static SelectionPolicy parse(std::string_view text);
  std::string to_string() const;

  /// Throws std::invalid_argument if weights are negative or do not sum to 1,
  /// or a referenced objective is not in `o`.
  void check(const ObjectiveSet& o) const;
};

/// Picks one plan from the frontier. With a cache, a policy-cache hit on an
/// unchanged frontier returns the remembered plan directly; hits naming a plan
/// no longer on the frontier are counted stale and ignored.
/// Throws PlanningFault on an empty frontier, InfeasibleConstraints when no
/// plan meets the budgets.
const FrontierEntry& select(const ParetoFrontier& f, const SelectionPolicy& p, MMCache* cache = nullptr);

/// Negative if `a` is strictly preferred to `b` under `p`, positive if `b` is,
/// 0 otherwise. Weighted scores normalize against `reference`.
int compare_under_policy(const CostDistribution& a, const CostDistribution& b, const SelectionPolicy& p,
                         std::span<const CostDistribution> reference);

// ---------------------------------------------------------------------------
// Re-optimization

/// Re-plans the unexecuted suffix of `ew`. Nodes in `done` keep their binding
/// and cost (from `realized` where present, else estimated). With `done`
/// empty this is optimize(ew.base); otherwise the structure of ew.base is
/// kept. Throws PlanningFault if `done` is not closed under data ancestry.
ParetoFrontier reoptimize(const ExecutableWorkflow& ew, const std::set<std::string>& done,
                          const std::map<std::string, CostDistribution>& realized, const ObjectiveSet& o,
                          const PlanningInputs& in, const PlannerOptions& opts = {});

} // namespace agentplan
