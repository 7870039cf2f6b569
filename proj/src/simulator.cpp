#include "agentplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "agentplan/error.hpp"
#include "agentplan/hash.hpp"

namespace agentplan {

LogNormal LogNormal::matching(double mean, double variance) {
  LogNormal ln;
  if (!(mean > 0.0)) {
    ln.mu = -std::numeric_limits<double>::infinity();
    return ln;
  }
  const double s2 = std::log1p(std::max(variance, 0.0) / (mean * mean));
  ln.sigma = std::sqrt(s2);
  ln.mu = std::log(mean) - s2 / 2.0;
  return ln;
}

double LogNormal::sample(double z) const {
  if (std::isinf(mu)) return 0.0;
  return std::exp(mu + sigma * z);
}

TaskSignature node_signature(const AgentSpec& agent, const std::string& input_digest) {
  TaskSignature sig;
  sig.capability = agent.capability;
  sig.input_digest = input_digest;
  sig.param_slots = {{"input", input_digest}};
  sig.free_text = agent.description;
  return sig;
}

Simulator::Simulator(const Registry& registry, const Pools& pools, SimulatorConfig config)
    : registry_(registry), pools_(pools), config_(config) {}

void Simulator::inject(const std::vector<FaultSpec>& faults) {
  for (const auto& f : faults) {
    if (!pools_.find_engine(f.engine_id)) throw SimulationFault("fault names unknown engine '" + f.engine_id + "'");
    if (!std::isfinite(f.latency_factor) || f.latency_factor < 1.0)
      throw SimulationFault("fault factor for '" + f.engine_id + "' must be finite and >= 1");
    if (!std::isfinite(f.effective_from)) throw SimulationFault("fault start time must be finite");
  }
  faults_.insert(faults_.end(), faults.begin(), faults.end());
}

double Simulator::fault_factor(const std::string& engine, double t) const {
  double factor = 1.0;
  for (const auto& f : faults_)
    if (f.engine_id == engine && f.effective_from <= t) factor *= f.latency_factor;
  return factor;
}

double Simulator::normal_draw(std::uint64_t seed, const std::string& run_id, const std::string& agent_id) {
  const auto s = hash_combine(hash_combine(seed, fnv1a(run_id)), fnv1a(agent_id));
  std::mt19937_64 rng(s);
  std::normal_distribution<double> normal;
  return normal(rng);
}

double Simulator::sample_latency(const AgentSpec& agent, const Binding& binding, const NodeWorkload& wl,
                                 double z) const {
  const auto est = estimate_node(agent, binding, wl, pools_, nullptr);
  return LogNormal::matching(est.m(Dim::Latency), est.v(Dim::Latency)).sample(z);
}

Execution Simulator::start(const ExecutableWorkflow& plan, const RunOptions& opts, MMCache* cache) const {
  if (auto report = validate_executable(plan, registry_); !report.ok())
    throw InvalidWorkflow("cannot run plan: " + report.to_string());
  for (const auto& [id, b] : plan.bindings) {
    const auto* agent = registry_.find_agent(id);
    if (!pools_.find_engine(b.engine)) throw SimulationFault("node '" + id + "' bound to unknown engine '" + b.engine + "'");
    if (b.model && !pools_.find_model(*b.model))
      throw SimulationFault("node '" + id + "' bound to unknown model '" + *b.model + "'");
    if (!agent || !binding_admissible(*agent, b, pools_))
      throw SimulationFault("node '" + id + "' has an inadmissible binding '" + b.key() + "'");
  }
  return Execution(*this, plan, opts, cache);
}

RunResult Simulator::run(const ExecutableWorkflow& plan, const RunOptions& opts, MMCache* cache) const {
  return start(plan, opts, cache).finish();
}

// ---------------------------------------------------------------------------
// Execution

Execution::Execution(const Simulator& sim, ExecutableWorkflow plan, RunOptions opts, MMCache* cache)
    : sim_(&sim), plan_(std::move(plan)), opts_(std::move(opts)), cache_(cache), clock_(opts_.start_ms) {
  result_.start_ms = opts_.start_ms;
  result_.end_ms = opts_.start_ms;
}

void Execution::rebind(const ExecutableWorkflow& plan) {
  if (plan.order != plan_.order || canonical_hash(plan.base) != canonical_hash(plan_.base))
    throw SimulationFault("rebind must keep the workflow structure");
  for (const auto& d : done_) {
    auto it = plan.bindings.find(d);
    if (it == plan.bindings.end() || it->second != plan_.bindings.at(d))
      throw SimulationFault("rebind changes completed node '" + d + "'");
  }
  for (const auto& [id, b] : plan.bindings) {
    const auto* agent = sim_->registry().find_agent(id);
    if (!agent || !binding_admissible(*agent, b, sim_->pools()))
      throw SimulationFault("node '" + id + "' has an inadmissible binding '" + b.key() + "'");
  }
  plan_ = plan;
}

std::vector<TelemetryRecord> Execution::step() {
  if (finished()) return {};
  const auto& layer = plan_.order[next_layer_];
  const auto& w = plan_.base;
  const auto& pools = sim_->pools();
  const double layer_start = clock_;
  double layer_end = layer_start;
  std::vector<TelemetryRecord> records;

  for (const auto& n : layer) {
    const auto* agent = sim_->registry().find_agent(n);
    const auto& binding = plan_.bindings.at(n);
    const auto* engine = pools.find_engine(binding.engine);

    std::vector<std::string> producers;
    for (const auto& e : w.edges)
      if (e.kind == EdgeKind::Data && e.to == n) producers.push_back(e.from);
    std::sort(producers.begin(), producers.end());
    producers.erase(std::unique(producers.begin(), producers.end()), producers.end());

    std::uint64_t input;
    if (producers.empty()) {
      input = hash_combine(fnv1a(agent->capability, fnv1a("source")), fnv1a(w.input_key));
      input = hash_combine(input, opts_.epoch);
    } else {
      input = fnv1a("derived");
      for (const auto& p : producers) input = hash_combine(input, fnv1a(result_.outputs.at(p)));
    }
    const auto input_digest = to_hex(input);
    const double start = layer_start + (producers.empty() ? 0.0 : sim_->config().edge_latency_ms);

    const auto est = estimate_node(*agent, binding, workload_for(w, *agent), pools, nullptr);
    TelemetryRecord r;
    r.run_id = opts_.run_id;
    r.agent_id = n;
    r.binding = binding;
    r.timestamp = start;

    const auto sig = node_signature(*agent, input_digest);
    std::optional<ResultHit> hit;
    if (cache_) hit = agent->stochastic() ? cache_->get_semantic(sig) : cache_->get_exact(sig);

    std::string output;
    if (hit) {
      r.cache_hit = true;
      r.latency_ms = cache_->config().lookup_cost_ms;
      output = hit->payload;
    } else {
      const double z = Simulator::normal_draw(opts_.seed, opts_.run_id, n);
      const double lat = LogNormal::matching(est.m(Dim::Latency), est.v(Dim::Latency)).sample(z) *
                         sim_->fault_factor(binding.engine, start);
      const double seconds = lat / 1000.0;
      r.latency_ms = lat;
      r.tokens = est.m(Dim::Tokens);
      r.monetary_usd = engine->monetary_rate * seconds;
      if (binding.model) {
        const auto* model = pools.find_model(*binding.model);
        r.monetary_usd += r.tokens / 1e6 * model->price_per_million_tokens;
      }
      r.energy_j = engine->energy_rate * seconds;
      std::uint64_t out = hash_combine(fnv1a(n, fnv1a("output")), input);
      if (agent->stochastic()) out = hash_combine(hash_combine(out, opts_.seed), fnv1a(opts_.run_id));
      output = to_hex(out);
      if (cache_) cache_->put_result(sig, output, !agent->stochastic());
    }

    CostDistribution c;
    c.m(Dim::Latency) = r.latency_ms;
    c.m(Dim::Monetary) = r.monetary_usd;
    c.m(Dim::Tokens) = r.tokens;
    c.m(Dim::Energy) = r.energy_j;
    c.m(Dim::Error) = est.m(Dim::Error);
    realized_[n] = c;
    result_.outputs[n] = output;
    done_.insert(n);

    layer_end = std::max(layer_end, start + r.latency_ms);
    result_.monetary_usd += r.monetary_usd;
    result_.tokens += r.tokens;
    result_.energy_j += r.energy_j;
    if (r.cache_hit) ++result_.cache_hits;
    records.push_back(r);
    result_.telemetry.push_back(std::move(r));
  }

  clock_ = layer_end;
  result_.end_ms = clock_;
  result_.latency_ms = result_.end_ms - result_.start_ms;
  ++next_layer_;
  return records;
}

RunResult Execution::finish() {
  while (!finished()) step();
  return result_;
}

} // namespace agentplan
