#pragma once

// Synthetic abstract workflows drawn from an enterprise workload profile,
// the registry and pools they run against, and the cache/planner bench.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agentplan/cost_model.hpp"
#include "agentplan/error.hpp"
#include "agentplan/mmcache.hpp"
#include "agentplan/planner.hpp"
#include "agentplan/search_space.hpp"
#include "agentplan/workflow.hpp"

namespace agentplan {

/// Inconsistent generation profile.
class GenerationFault : public Fault {
 public:
  using Fault::Fault;
};

struct WorkloadProfile {
  std::vector<std::pair<StructureLabel, double>> structure_mix;
  int min_tasks = 3;
  int max_tasks = 15;
  int mode_tasks = 6;
  /// Per-workflow inclusion probability of the shared tasks.
  std::vector<std::pair<std::string, double>> inclusion;
  double deterministic_fraction = 0.43;
  /// Engine class of deterministic tasks.
  std::vector<std::pair<EngineClass, double>> engine_mix;

  static WorkloadProfile defaults();
  /// Throws GenerationFault when a distribution does not sum to 1 (within
  /// 1e-9), a probability leaves [0, 1], or the task range is empty.
  void check() const;

  static WorkloadProfile from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Task types the generator draws from, in pipeline order.
const std::vector<std::string>& task_catalog();

/// Agents for every (task, engine class) pair, "task/class" for deterministic
/// variants and "task/llm" for stochastic ones, plus an orchestrator.
Registry generator_registry();

/// Two engines per deterministic class, a local and an API inference engine,
/// and models covering three or four stochastic tasks each.
Pools generator_pools();

/// Discrete task-count weights on [min_tasks, max_tasks], triangular with
/// the profile's mode. Index 0 corresponds to min_tasks.
std::vector<double> task_count_weights(const WorkloadProfile& p);

/// Deterministic for fixed (n, profile, seed). Every workflow validates
/// against generator_registry().
std::vector<AbstractWorkflow> generate(std::size_t n, const WorkloadProfile& profile, std::uint64_t seed);

/// Feedback-style categories that are generated but not optimized.
bool excluded_from_optimization(const AbstractWorkflow& w);

// ---------------------------------------------------------------------------
// Bench

struct BenchOptions {
  ObjectiveSet objectives{Dim::Latency, Dim::Monetary, Dim::Error};
  std::optional<SelectionPolicy> policy;  ///< balanced over objectives if unset
  std::uint64_t seed = 0;
  bool cache = true;
  CacheConfig cache_config;
  PlannerOptions planner;
  /// Workflows whose space exceeds this are skipped.
  std::uint64_t max_space = 100000000;
};

struct BenchRow {
  std::string name;
  StructureLabel label = StructureLabel::Chain;
  std::size_t nodes = 0;
  std::uint64_t space = 0;
  std::optional<std::string> skipped;
  std::size_t frontier_size = 0;
  std::uint64_t frontier_digest = 0;
  std::uint64_t selected = 0;
  double latency_ms = 0.0;
  double monetary_usd = 0.0;
  double tokens = 0.0;
  double energy_j = 0.0;
  std::size_t cache_hits = 0;
  std::size_t deterministic_nodes = 0;
  std::size_t deterministic_hits = 0;
  double planning_ms = 0.0;  ///< wall clock
  double run_ms = 0.0;       ///< wall clock
};

struct BenchPass {
  std::vector<BenchRow> rows;
  CacheStats cache;
  double latency_ms = 0.0;
  double monetary_usd = 0.0;
  double tokens = 0.0;
  double energy_j = 0.0;
  double planning_ms = 0.0;  ///< wall clock
  double run_ms = 0.0;       ///< wall clock
  double symbolic_hit_rate() const;
  /// Fraction of executed deterministic nodes served from the cache.
  double deterministic_hit_rate() const;
};

struct BenchReport {
  std::size_t workflows = 0;
  /// Caches on: a first pass and a replay of the same workload.
  BenchPass first;
  BenchPass replay;
  /// Caches off.
  std::optional<BenchPass> baseline;
  /// Frontiers and selections of the first pass equal the baseline.
  bool transparent = true;

  nlohmann::json to_json() const;
};

/// Optimizes and runs each workflow in order through one shared cache, then
/// replays the workload. With opts.cache the same workload also runs with
/// caches off for comparison; without it only cache-off passes run.
BenchReport bench(const std::vector<AbstractWorkflow>& workflows, const Registry& registry, const Pools& pools,
                  const BenchOptions& opts);

} // namespace agentplan
