#pragma once

// Telemetry consumer: folds observations into the statistics store, raises
// re-optimization triggers when observed costs drift from profile estimates,
// and drives monitored multi-run executions.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agentplan/cost_model.hpp"
#include "agentplan/planner.hpp"
#include "agentplan/simulator.hpp"
#include "agentplan/telemetry.hpp"

namespace agentplan {

struct DeviationRule {
  double delta = 0.5;
  std::size_t min_samples = 3;
  std::vector<Dim> dims{Dim::Latency, Dim::Monetary};

  /// Throws std::invalid_argument unless delta > 0, min_samples >= 1 and the
  /// monitored dimensions are observable (not error).
  void check() const;
  static DeviationRule disabled() { return {std::numeric_limits<double>::infinity(), 1, {Dim::Latency}}; }
};

struct ReoptTrigger {
  std::uint64_t id = 0;
  std::string run_id;
  std::string agent_id;
  Binding binding;
  Dim dim = Dim::Latency;
  double estimate = 0.0;
  double observed = 0.0;  ///< EWMA at trigger time
};

struct BindingChange {
  std::string agent_id;
  Binding from;
  Binding to;
};

struct Decision {
  bool switched = false;
  ExecutableWorkflow plan;  ///< the plan to continue with
  CostDistribution current_cost;
  CostDistribution chosen_cost;
  std::vector<BindingChange> changes;
  std::string reason;
};

class Monitor {
 public:
  Monitor(const Registry& registry, const Pools& pools, Statistics& stats, DeviationRule rule = {});

  /// Workloads used for profile estimates come from this workflow; agents
  /// outside it use their registry defaults.
  void watch(const AbstractWorkflow& w) { workloads_ = w; }

  /// Folds `t` into the statistics and returns a new trigger, if any.
  std::optional<ReoptTrigger> record(const TelemetryRecord& t);

  /// Re-plans the suffix after `done` and switches iff the policy strictly
  /// prefers the selected plan to the current one (both re-estimated with
  /// the current statistics). Closes the trigger either way.
  Decision handle_trigger(const ReoptTrigger& trigger, const ExecutableWorkflow& current,
                          const std::set<std::string>& done, const std::map<std::string, CostDistribution>& realized,
                          const ObjectiveSet& o, const SelectionPolicy& policy, const PlannerOptions& opts = {});

  const DeviationRule& rule() const { return rule_; }
  const std::vector<ReoptTrigger>& triggers() const { return log_; }
  std::size_t open_triggers() const { return open_.size(); }
  std::size_t rejected() const { return rejected_; }

 private:
  const Registry& registry_;
  const Pools& pools_;
  Statistics& stats_;
  DeviationRule rule_;
  std::optional<AbstractWorkflow> workloads_;
  std::set<std::pair<std::string, std::string>> open_;
  std::vector<ReoptTrigger> log_;
  std::size_t rejected_ = 0;
};

// ---------------------------------------------------------------------------
// Monitored runs

struct SessionConfig {
  std::size_t runs = 1;
  std::uint64_t seed = 0;
  /// Without a monitor the plan never changes and no trigger is raised.
  bool monitor = true;
  DeviationRule rule;
  ObjectiveSet objectives = ObjectiveSet::all();
  SelectionPolicy policy = SelectionPolicy::balanced(ObjectiveSet::all());
  PlannerOptions planner;
  /// First run's epoch; run i uses first_epoch + i.
  std::uint64_t first_epoch = 0;
};

struct SwitchEvent {
  std::string run_id;
  /// Layers of that run completed before the switch.
  std::size_t after_layer = 0;
  std::uint64_t trigger_id = 0;
  std::vector<BindingChange> changes;
  CostDistribution before;
  CostDistribution after;
};

struct SessionResult {
  std::vector<RunResult> runs;
  std::vector<TelemetryRecord> telemetry;
  std::vector<ReoptTrigger> triggers;
  std::vector<SwitchEvent> switches;
  ExecutableWorkflow final_plan;
  std::size_t rejected = 0;
};

/// Runs `plan` `runs` times back to back on one logical clock. Triggers
/// raised inside a layer are handled after that layer; those raised in the
/// last layer are handled before the next run starts.
SessionResult run_session(const ExecutableWorkflow& plan, const Simulator& sim, Statistics& stats, MMCache* cache,
                          const SessionConfig& config);

} // namespace agentplan
