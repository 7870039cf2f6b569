#pragma once

// Seeded simulation of heterogeneous engines. Runs an executable workflow
// layer by layer on a logical clock and emits one telemetry record per node.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agentplan/cost_model.hpp"
#include "agentplan/mmcache.hpp"
#include "agentplan/search_space.hpp"
#include "agentplan/telemetry.hpp"
#include "agentplan/workflow.hpp"

namespace agentplan {

struct FaultSpec {
  std::string engine_id;
  double latency_factor = 1.0;
  /// Applies to nodes starting at or after this logical time (ms).
  double effective_from = 0.0;
};

/// Log-normal parameters matching a given mean and variance.
struct LogNormal {
  double mu = 0.0;
  double sigma = 0.0;

  static LogNormal matching(double mean, double variance);
  double sample(double z) const;
};

struct SimulatorConfig {
  /// Added before a node starts when it has at least one data producer.
  double edge_latency_ms = 0.0;
};

struct RunOptions {
  std::uint64_t seed = 0;
  std::string run_id = "run-0";
  /// Identifies the source data generation; runs in the same epoch read the
  /// same inputs, so deterministic results are reusable across them.
  std::uint64_t epoch = 0;
  double start_ms = 0.0;
};

struct RunResult {
  std::vector<TelemetryRecord> telemetry;
  /// Output digest per node.
  std::map<std::string, std::string> outputs;
  double start_ms = 0.0;
  double end_ms = 0.0;
  double latency_ms = 0.0;  ///< end_ms - start_ms
  double monetary_usd = 0.0;
  double tokens = 0.0;
  double energy_j = 0.0;
  std::size_t cache_hits = 0;
};

class Simulator;

/// One run in progress. The plan's bindings may change between layers, but
/// never for nodes already executed.
class Execution {
 public:
  bool finished() const { return next_layer_ >= plan_.order.size(); }
  std::size_t next_layer() const { return next_layer_; }
  const ExecutableWorkflow& plan() const { return plan_; }
  /// Nodes executed so far.
  const std::set<std::string>& done() const { return done_; }
  /// Observed cost per executed node (variance 0, error from the profile).
  const std::map<std::string, CostDistribution>& realized() const { return realized_; }
  const RunResult& result() const { return result_; }

  /// Replaces the plan. Throws SimulationFault if the structure differs or a
  /// completed node's binding changes.
  void rebind(const ExecutableWorkflow& plan);

  /// Executes the next layer and returns its records.
  std::vector<TelemetryRecord> step();

  /// Executes all remaining layers.
  RunResult finish();

 private:
  friend class Simulator;
  Execution(const Simulator& sim, ExecutableWorkflow plan, RunOptions opts, MMCache* cache);

  const Simulator* sim_;
  ExecutableWorkflow plan_;
  RunOptions opts_;
  MMCache* cache_;
  std::size_t next_layer_ = 0;
  double clock_ = 0.0;
  std::set<std::string> done_;
  std::map<std::string, CostDistribution> realized_;
  RunResult result_;
};

class Simulator {
 public:
  Simulator(const Registry& registry, const Pools& pools, SimulatorConfig config = {});

  /// Throws SimulationFault on an unknown engine or a factor that is not
  /// finite and >= 1.
  void inject(const std::vector<FaultSpec>& faults);
  void clear_faults() { faults_.clear(); }
  const std::vector<FaultSpec>& faults() const { return faults_; }

  /// Product of the factors of faults on `engine` active at time `t`.
  double fault_factor(const std::string& engine, double t) const;

  /// Throws InvalidWorkflow for an invalid plan and SimulationFault when a
  /// binding names an unknown or inadmissible profile.
  Execution start(const ExecutableWorkflow& plan, const RunOptions& opts, MMCache* cache = nullptr) const;
  RunResult run(const ExecutableWorkflow& plan, const RunOptions& opts, MMCache* cache = nullptr) const;

  /// Standard normal draw of the (seed, run, agent) stream. Independent of the
  /// binding, so rebinding a node changes its distribution but not its draw.
  static double normal_draw(std::uint64_t seed, const std::string& run_id, const std::string& agent_id);

  /// Latency of one uncached execution, before fault factors.
  double sample_latency(const AgentSpec& agent, const Binding& binding, const NodeWorkload& wl, double z) const;

  const Registry& registry() const { return registry_; }
  const Pools& pools() const { return pools_; }
  const SimulatorConfig& config() const { return config_; }

 private:
  const Registry& registry_;
  const Pools& pools_;
  SimulatorConfig config_;
  std::vector<FaultSpec> faults_;
};

/// Signature the simulator uses for a node's cache lookups.
TaskSignature node_signature(const AgentSpec& agent, const std::string& input_digest);

} // namespace agentplan
