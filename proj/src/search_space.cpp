#include "agentplan/search_space.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "agentplan/error.hpp"

namespace agentplan {

namespace {

constexpr std::array<std::pair<EngineClass, std::string_view>, 6> kEngineClasses{{
    {EngineClass::Relational, "relational"},
    {EngineClass::Streaming, "streaming"},
    {EngineClass::Vector, "vector"},
    {EngineClass::Analytics, "analytics"},
    {EngineClass::InferenceLocal, "inference-local"},
    {EngineClass::InferenceApi, "inference-api"},
}};

void check_moments(const Moments& m, const std::string& what, bool strictly_positive) {
  if (!std::isfinite(m.mean) || !std::isfinite(m.variance) || m.variance < 0 ||
      (strictly_positive ? m.mean <= 0 : m.mean < 0))
    throw ConfigError(what + " has invalid moments");
}

} // namespace

std::string_view to_string(Hosting h) { return h == Hosting::Local ? "local" : "api"; }

std::string_view to_string(EngineClass c) {
  for (const auto& [k, v] : kEngineClasses)
    if (k == c) return v;
  return "?";
}

std::optional<Hosting> parse_hosting(std::string_view s) {
  if (s == "local") return Hosting::Local;
  if (s == "api") return Hosting::Api;
  return std::nullopt;
}

std::optional<EngineClass> parse_engine_class(std::string_view s) {
  for (const auto& [k, v] : kEngineClasses)
    if (v == s) return k;
  return std::nullopt;
}

Pools::Pools(std::vector<ModelProfile> models, std::vector<EngineProfile> engines)
    : models_(std::move(models)), engines_(std::move(engines)) {
  std::sort(models_.begin(), models_.end(), [](auto& a, auto& b) { return a.model_id < b.model_id; });
  std::sort(engines_.begin(), engines_.end(), [](auto& a, auto& b) { return a.engine_id < b.engine_id; });
  for (std::size_t i = 0; i < models_.size(); ++i) {
    const auto& m = models_[i];
    const std::string what = "model '" + m.model_id + "'";
    if (m.model_id.empty()) throw ConfigError("model with empty id");
    if (!model_index_.emplace(m.model_id, i).second) throw ConfigError("duplicate " + what);
    if (!(m.price_per_million_tokens >= 0)) throw ConfigError(what + " has a negative price");
    check_moments(m.latency_per_token, what + " latency_per_token", true);
    for (const auto& [cap, q] : m.quality)
      if (!(q >= 0.0 && q <= 1.0)) throw ConfigError(what + " quality for '" + cap + "' outside [0,1]");
  }
  for (std::size_t i = 0; i < engines_.size(); ++i) {
    const auto& e = engines_[i];
    const std::string what = "engine '" + e.engine_id + "'";
    if (e.engine_id.empty()) throw ConfigError("engine with empty id");
    if (!engine_index_.emplace(e.engine_id, i).second) throw ConfigError("duplicate " + what);
    if (e.supported_capabilities.empty()) throw ConfigError(what + " supports no capability");
    check_moments(e.startup_latency, what + " startup_latency", false);
    check_moments(e.unit_rate, what + " unit_rate", true);
    if (!(e.monetary_rate >= 0) || !(e.energy_rate >= 0)) throw ConfigError(what + " has a negative rate");
  }
}

const ModelProfile* Pools::find_model(std::string_view id) const {
  auto it = model_index_.find(std::string(id));
  return it == model_index_.end() ? nullptr : &models_[it->second];
}

const EngineProfile* Pools::find_engine(std::string_view id) const {
  auto it = engine_index_.find(std::string(id));
  return it == engine_index_.end() ? nullptr : &engines_[it->second];
}

std::vector<Binding> candidate_bindings(const AgentSpec& agent, const Pools& pools) {
  std::vector<Binding> out;
  if (!agent.stochastic()) {
    for (const auto& e : pools.engines())
      if (!is_inference(e.engine_class) && e.supported_capabilities.contains(agent.capability))
        out.push_back({agent.agent_id, std::nullopt, e.engine_id});
  } else {
    for (const auto& m : pools.models()) {
      if (!m.supports(agent.capability)) continue;
      const auto wanted = m.hosting == Hosting::Local ? EngineClass::InferenceLocal : EngineClass::InferenceApi;
      for (const auto& e : pools.engines())
        if (e.engine_class == wanted) out.push_back({agent.agent_id, m.model_id, e.engine_id});
    }
  }
  std::sort(out.begin(), out.end(), [](const Binding& a, const Binding& b) {
    return std::tie(a.engine, a.model) < std::tie(b.engine, b.model);
  });
  return out;
}

bool binding_admissible(const AgentSpec& agent, const Binding& b, const Pools& pools) {
  if (b.agent_id != agent.agent_id) return false;
  const auto* e = pools.find_engine(b.engine);
  if (!e) return false;
  if (!agent.stochastic())
    return !b.model && !is_inference(e->engine_class) && e->supported_capabilities.contains(agent.capability);
  if (!b.model) return false;
  const auto* m = pools.find_model(*b.model);
  if (!m || !m->supports(agent.capability)) return false;
  return e->engine_class == (m->hosting == Hosting::Local ? EngineClass::InferenceLocal : EngineClass::InferenceApi);
}

SpaceSize space_size(std::span<const AbstractWorkflow> variants, const Registry& registry, const Pools& pools) {
  SpaceSize result;
  std::unordered_map<std::string, std::uint64_t> per_agent;
  for (const auto& w : variants) {
    std::uint64_t product = 1;
    for (const auto& n : w.nodes) {
      auto it = per_agent.find(n);
      if (it == per_agent.end()) {
        const auto* a = registry.find_agent(n);
        const std::uint64_t k = a ? candidate_bindings(*a, pools).size() : 0;
        it = per_agent.emplace(n, k).first;
      }
      if (it->second == 0) {
        result.count = 0;
        result.unsatisfiable_agent = n;
        return result;
      }
      if (__builtin_mul_overflow(product, it->second, &product)) result.overflow = true;
    }
    if (__builtin_add_overflow(result.count, product, &result.count)) result.overflow = true;
  }
  return result;
}

} // namespace agentplan
