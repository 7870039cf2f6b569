#include "agentplan/monitor.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "agentplan/error.hpp"

namespace agentplan {

void DeviationRule::check() const {
  if (!(delta > 0.0)) throw std::invalid_argument("deviation threshold must be > 0");
  if (min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");
  if (dims.empty()) throw std::invalid_argument("no monitored dimension");
  for (auto d : dims)
    if (d == Dim::Error) throw std::invalid_argument("error is not observed in telemetry and cannot be monitored");
}

Monitor::Monitor(const Registry& registry, const Pools& pools, Statistics& stats, DeviationRule rule)
    : registry_(registry), pools_(pools), stats_(stats), rule_(std::move(rule)) {
  rule_.check();
}

std::optional<ReoptTrigger> Monitor::record(const TelemetryRecord& t) {
  if (!stats_.update(t)) {
    ++rejected_;
    return std::nullopt;
  }
  if (t.cache_hit) return std::nullopt;
  const auto key = std::make_pair(t.agent_id, t.binding.key());
  if (open_.contains(key)) return std::nullopt;
  const auto obs = stats_.lookup(t.agent_id, t.binding);
  if (!obs || obs->samples < rule_.min_samples) return std::nullopt;

  const auto* agent = registry_.find_agent(t.agent_id);
  const auto wl = workloads_ ? workload_for(*workloads_, *agent) : agent->default_workload;
  const auto est = estimate_node(*agent, t.binding, wl, pools_, nullptr);
  for (auto d : rule_.dims) {
    const auto& observed = obs->ewma[idx(d)];
    if (!observed) continue;
    const double e = est.m(d);
    const double x = *observed;
    const double deviation =
        e > 0.0 ? std::abs(x - e) / e : (x > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (deviation > rule_.delta) {
      ReoptTrigger trig{log_.size() + 1, t.run_id, t.agent_id, t.binding, d, e, x};
      open_.insert(key);
      log_.push_back(trig);
      return trig;
    }
  }
  return std::nullopt;
}

Decision Monitor::handle_trigger(const ReoptTrigger& trigger, const ExecutableWorkflow& current,
                                 const std::set<std::string>& done,
                                 const std::map<std::string, CostDistribution>& realized, const ObjectiveSet& o,
                                 const SelectionPolicy& policy, const PlannerOptions& opts) {
  open_.erase({trigger.agent_id, trigger.binding.key()});

  Decision d;
  d.plan = current;
  std::map<std::string, CostDistribution> frozen;
  for (const auto& n : done)
    if (auto it = realized.find(n); it != realized.end()) frozen[n] = it->second;
  d.current_cost = estimate_workflow(current, registry_, pools_, {&stats_, &frozen, opts.hub_edge_latency_ms});
  d.chosen_cost = d.current_cost;

  const PlanningInputs in{registry_, pools_, &stats_};
  const auto frontier = reoptimize(current, done, frozen, o, in, opts);
  const FrontierEntry* chosen = nullptr;
  try {
    chosen = &select(frontier, policy);
  } catch (const InfeasibleConstraints& e) {
    d.reason = std::string("keep: ") + e.what();
    return d;
  }
  d.chosen_cost = chosen->cost;
  if (chosen->hash == plan_hash(current)) {
    d.reason = "keep: current plan is still the policy's choice";
    return d;
  }

  std::vector<CostDistribution> reference;
  for (const auto& e : frontier.entries) reference.push_back(e.cost);
  reference.push_back(d.current_cost);
  if (compare_under_policy(chosen->cost, d.current_cost, policy, reference) >= 0) {
    d.reason = "keep: no strictly better plan";
    return d;
  }

  d.switched = true;
  d.plan = chosen->plan;
  for (const auto& [id, b] : chosen->plan.bindings) {
    auto it = current.bindings.find(id);
    if (it == current.bindings.end() || it->second != b)
      d.changes.push_back({id, it == current.bindings.end() ? Binding{id, std::nullopt, ""} : it->second, b});
  }
  d.reason = "switch";
  return d;
}

// ---------------------------------------------------------------------------

namespace {

std::string run_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run-%04zu", i + 1);
  return buf;
}

} // namespace

SessionResult run_session(const ExecutableWorkflow& plan, const Simulator& sim, Statistics& stats, MMCache* cache,
                          const SessionConfig& config) {
  SessionResult out;
  Monitor monitor(sim.registry(), sim.pools(), stats, config.monitor ? config.rule : DeviationRule::disabled());
  monitor.watch(plan.base);
  ExecutableWorkflow current = plan;
  std::vector<ReoptTrigger> pending;
  double clock = 0.0;

  auto handle = [&](const std::string& run_id, std::size_t after_layer, const ExecutableWorkflow& now,
                    const std::set<std::string>& done, const std::map<std::string, CostDistribution>& realized)
      -> std::optional<ExecutableWorkflow> {
    std::optional<ExecutableWorkflow> next;
    for (const auto& t : pending) {
      const auto& base = next ? *next : now;
      auto d = monitor.handle_trigger(t, base, done, realized, config.objectives, config.policy, config.planner);
      if (!d.switched) continue;
      out.switches.push_back({run_id, after_layer, t.id, d.changes, d.current_cost, d.chosen_cost});
      next = std::move(d.plan);
    }
    pending.clear();
    return next;
  };

  for (std::size_t i = 0; i < config.runs; ++i) {
    const auto run_id = run_name(i);
    if (!pending.empty()) {
      if (auto next = handle(run_id, 0, current, {}, {})) {
        current = std::move(*next);
        monitor.watch(current.base);
      }
    }
    auto exec = sim.start(current, {config.seed, run_id, config.first_epoch + i, clock}, cache);
    while (!exec.finished()) {
      for (const auto& r : exec.step()) {
        if (!config.monitor) continue;
        if (auto t = monitor.record(r)) pending.push_back(*t);
      }
      if (!exec.finished() && !pending.empty()) {
        if (auto next = handle(run_id, exec.next_layer(), exec.plan(), exec.done(), exec.realized()))
          exec.rebind(*next);
      }
    }
    const auto& result = exec.result();
    clock = result.end_ms;
    current = exec.plan();
    out.telemetry.insert(out.telemetry.end(), result.telemetry.begin(), result.telemetry.end());
    out.runs.push_back(result);
  }
  out.triggers = monitor.triggers();
  out.final_plan = current;
  out.rejected = monitor.rejected();
  return out;
}

} // namespace agentplan
