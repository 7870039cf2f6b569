#include "agentplan/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "agentplan/error.hpp"

namespace agentplan {

std::string_view dim_name(Dim d) {
  switch (d) {
    case Dim::Latency: return "latency_ms";
    case Dim::Monetary: return "monetary_usd";
    case Dim::Error: return "error";
    case Dim::Tokens: return "tokens";
    case Dim::Energy: return "energy_j";
  }
  return "?";
}

std::optional<Dim> parse_dim(std::string_view s) {
  for (auto d : kAllDims)
    if (dim_name(d) == s) return d;
  if (s == "latency") return Dim::Latency;
  if (s == "monetary" || s == "cost" || s == "money") return Dim::Monetary;
  if (s == "energy") return Dim::Energy;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ObjectiveSet

ObjectiveSet::ObjectiveSet(std::initializer_list<Dim> dims) { init({dims.begin(), dims.size()}); }
ObjectiveSet::ObjectiveSet(std::span<const Dim> dims) { init(dims); }

void ObjectiveSet::init(std::span<const Dim> dims) {
  if (dims.empty()) throw std::invalid_argument("objective set must not be empty");
  for (auto d : dims) {
    const std::uint32_t bit = 1U << idx(d);
    if (mask_ & bit) throw std::invalid_argument("duplicate objective '" + std::string(dim_name(d)) + "'");
    mask_ |= bit;
  }
  for (auto d : kAllDims)
    if (contains(d)) dims_[count_++] = d;
}

ObjectiveSet ObjectiveSet::all() { return ObjectiveSet(std::span<const Dim>(kAllDims)); }

ObjectiveSet ObjectiveSet::parse(std::string_view csv) {
  std::vector<Dim> dims;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    auto token = csv.substr(start, end - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty()) {
      auto d = parse_dim(token);
      if (!d) throw std::invalid_argument("unknown objective '" + std::string(token) + "'");
      dims.push_back(*d);
    }
    start = end + 1;
  }
  return ObjectiveSet(std::span<const Dim>(dims));
}

std::string ObjectiveSet::to_string() const {
  std::string out;
  for (auto d : dims()) {
    if (!out.empty()) out += ',';
    out += dim_name(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composition

double clamp_error_variance(double mean, double var) {
  const double room = std::max(0.0, std::min(mean, 1.0 - mean));
  return std::min(std::max(var, 0.0), room * room);
}

namespace {

constexpr double kTieEps = 1e-9;

void compose_common(const CostDistribution& x, const CostDistribution& y, CostDistribution& r) {
  for (auto d : {Dim::Monetary, Dim::Tokens, Dim::Energy}) {
    r.m(d) = x.m(d) + y.m(d);
    r.v(d) = x.v(d) + y.v(d);
  }
  r.m(Dim::Error) = 1.0 - (1.0 - x.m(Dim::Error)) * (1.0 - y.m(Dim::Error));
  r.v(Dim::Error) = clamp_error_variance(r.m(Dim::Error), x.v(Dim::Error) + y.v(Dim::Error));
}

} // namespace

CostDistribution compose_sequential(const CostDistribution& x, const CostDistribution& y) {
  CostDistribution r;
  compose_common(x, y, r);
  r.m(Dim::Latency) = x.m(Dim::Latency) + y.m(Dim::Latency);
  r.v(Dim::Latency) = x.v(Dim::Latency) + y.v(Dim::Latency);
  return r;
}

CostDistribution compose_parallel(const CostDistribution& x, const CostDistribution& y) {
  CostDistribution r;
  compose_common(x, y, r);
  const double a = x.m(Dim::Latency);
  const double b = y.m(Dim::Latency);
  if (std::abs(a - b) <= kTieEps) {
    r.m(Dim::Latency) = std::max(a, b);
    r.v(Dim::Latency) = std::max(x.v(Dim::Latency), y.v(Dim::Latency));
  } else if (a > b) {
    r.m(Dim::Latency) = a;
    r.v(Dim::Latency) = x.v(Dim::Latency);
  } else {
    r.m(Dim::Latency) = b;
    r.v(Dim::Latency) = y.v(Dim::Latency);
  }
  return r;
}

CostDistribution compose_layers(const Layers& layers,
                                const std::function<const CostDistribution&(const std::string&)>& node_cost) {
  CostDistribution total;
  // Pairwise composition rounds 1 - (1 - e) at every step; the error mean is
  // recomputed from the plain survival product so it equals the direct rule.
  double survival = 1.0;
  for (const auto& layer : layers) {
    CostDistribution span;
    bool first = true;
    for (const auto& n : layer) {
      const auto& c = node_cost(n);
      survival *= 1.0 - c.m(Dim::Error);
      span = first ? c : compose_parallel(span, c);
      first = false;
    }
    total = compose_sequential(total, span);
  }
  total.m(Dim::Error) = 1.0 - survival;
  total.v(Dim::Error) = clamp_error_variance(total.m(Dim::Error), total.v(Dim::Error));
  return total;
}

// ---------------------------------------------------------------------------
// Statistics

Statistics::Statistics(double alpha, KnownFn known) : alpha_(alpha), known_(std::move(known)) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("EWMA alpha must be in (0, 1]");
}

Statistics::Statistics(const Statistics& other) {
  std::shared_lock lock(other.mu_);
  alpha_ = other.alpha_;
  known_ = other.known_;
  table_ = other.table_;
  rejected_ = other.rejected_;
}

Statistics& Statistics::operator=(const Statistics& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  alpha_ = other.alpha_;
  known_ = other.known_;
  table_ = other.table_;
  rejected_ = other.rejected_;
  return *this;
}

bool Statistics::update(const TelemetryRecord& t) {
  const std::array<std::pair<Dim, double>, 4> observed{{
      {Dim::Latency, t.latency_ms},
      {Dim::Monetary, t.monetary_usd},
      {Dim::Tokens, t.tokens},
      {Dim::Energy, t.energy_j},
  }};
  const bool well_formed =
      !t.agent_id.empty() && std::all_of(observed.begin(), observed.end(), [](const auto& p) {
        return std::isfinite(p.second) && p.second >= 0.0;
      });
  std::unique_lock lock(mu_);
  if (!well_formed || (known_ && !known_(t.agent_id, t.binding))) {
    ++rejected_;
    return false;
  }
  if (t.cache_hit) return true;
  auto& entry = table_[{t.agent_id, t.binding.key()}];
  for (const auto& [d, value] : observed) {
    auto& slot = entry.ewma[idx(d)];
    slot = slot ? alpha_ * value + (1.0 - alpha_) * *slot : value;
  }
  ++entry.samples;
  return true;
}

std::optional<Statistics::Observed> Statistics::lookup(const std::string& agent_id,
                                                       const std::string& binding_key) const {
  std::shared_lock lock(mu_);
  auto it = table_.find({agent_id, binding_key});
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

std::size_t Statistics::rejected() const {
  std::shared_lock lock(mu_);
  return rejected_;
}

std::size_t Statistics::size() const {
  std::shared_lock lock(mu_);
  return table_.size();
}

Statistics::KnownFn known_bindings(const Registry& registry, const Pools& pools) {
  return [&registry, &pools](const std::string& agent_id, const Binding& b) {
    const auto* a = registry.find_agent(agent_id);
    return a && binding_admissible(*a, b, pools);
  };
}

// ---------------------------------------------------------------------------
// Estimation

CostDistribution estimate_node(const AgentSpec& agent, const Binding& binding, const NodeWorkload& wl,
                               const Pools& pools, const Statistics* stats) {
  const auto* engine = pools.find_engine(binding.engine);
  if (!engine) throw EstimationFault("agent '" + agent.agent_id + "': unknown engine '" + binding.engine + "'");

  CostDistribution c;
  // Processing term: cardinality / rate. Its variance uses the first-order
  // delta method for a random rate: Var(n / R) ~= n^2 Var(R) / E[R]^4.
  const double rate = engine->unit_rate.mean;
  const double n = wl.input_cardinality;
  double lat_mean = engine->startup_latency.mean + n / rate;
  double lat_var = engine->startup_latency.variance + n * n * engine->unit_rate.variance / (rate * rate * rate * rate);

  double token_cost = 0.0;
  double tokens = 0.0;
  double error = 0.0;
  if (agent.stochastic()) {
    if (!binding.model) throw EstimationFault("stochastic agent '" + agent.agent_id + "' bound without a model");
    const auto* model = pools.find_model(*binding.model);
    if (!model) throw EstimationFault("agent '" + agent.agent_id + "': unknown model '" + *binding.model + "'");
    auto q = model->quality.find(agent.capability);
    if (q == model->quality.end())
      throw EstimationFault("model '" + model->model_id + "' has no quality entry for capability '" +
                            agent.capability + "'");
    tokens = wl.tokens_in + wl.tokens_out;
    lat_mean += model->latency_per_token.mean * tokens;
    lat_var += tokens * tokens * model->latency_per_token.variance;
    token_cost = tokens / 1e6 * model->price_per_million_tokens;
    error = 1.0 - q->second;
  }

  const double seconds = lat_mean / 1000.0;
  const double var_seconds = lat_var / 1e6;
  c.m(Dim::Latency) = lat_mean;
  c.v(Dim::Latency) = lat_var;
  c.m(Dim::Monetary) = engine->monetary_rate * seconds + token_cost;
  c.v(Dim::Monetary) = engine->monetary_rate * engine->monetary_rate * var_seconds;
  c.m(Dim::Energy) = engine->energy_rate * seconds;
  c.v(Dim::Energy) = engine->energy_rate * engine->energy_rate * var_seconds;
  c.m(Dim::Tokens) = tokens;
  c.v(Dim::Tokens) = 0.0;
  c.m(Dim::Error) = error;
  // Clamped Bernoulli variance of a per-request correctness indicator.
  c.v(Dim::Error) = agent.stochastic() ? clamp_error_variance(error, error * (1.0 - error)) : 0.0;

  if (stats) {
    if (auto obs = stats->lookup(agent.agent_id, binding)) {
      for (auto d : kAllDims)
        if (obs->ewma[idx(d)]) c.m(d) = *obs->ewma[idx(d)];
    }
  }
  return c;
}

CostDistribution estimate_workflow(const ExecutableWorkflow& ew, const Registry& registry, const Pools& pools,
                                   const WorkflowCostOptions& opts) {
  std::map<std::string, CostDistribution> node_costs;
  for (const auto& layer : ew.order) {
    for (const auto& n : layer) {
      if (opts.realized) {
        if (auto it = opts.realized->find(n); it != opts.realized->end()) {
          node_costs[n] = it->second;
          continue;
        }
      }
      const auto* agent = registry.find_agent(n);
      if (!agent) throw EstimationFault("unknown agent '" + n + "'");
      auto b = ew.bindings.find(n);
      if (b == ew.bindings.end()) throw EstimationFault("node '" + n + "' has no binding");
      auto cost = estimate_node(*agent, b->second, workload_for(ew.base, *agent), pools, opts.stats);
      if (opts.hub_edge_latency_ms != 0.0 && agent->capability == kOrchestrationCapability) {
        const auto fanout = std::count_if(ew.base.edges.begin(), ew.base.edges.end(), [&](const Edge& e) {
          return e.kind == EdgeKind::Data && e.from == n;
        });
        cost.m(Dim::Latency) += opts.hub_edge_latency_ms * static_cast<double>(fanout);
      }
      node_costs[n] = cost;
    }
  }
  return compose_layers(ew.order, [&](const std::string& n) -> const CostDistribution& { return node_costs.at(n); });
}

} // namespace agentplan
