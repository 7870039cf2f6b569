#pragma once

// Model and engine pools, per-agent candidate bindings and search-space size.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agentplan/workflow.hpp"

namespace agentplan {

/// Mean and variance of a scalar quantity.
struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

enum class Hosting { Local, Api };

enum class EngineClass { Relational, Streaming, Vector, Analytics, InferenceLocal, InferenceApi };

std::string_view to_string(Hosting h);
std::string_view to_string(EngineClass c);
std::optional<Hosting> parse_hosting(std::string_view s);
std::optional<EngineClass> parse_engine_class(std::string_view s);

inline bool is_inference(EngineClass c) { return c == EngineClass::InferenceLocal || c == EngineClass::InferenceApi; }

struct ModelProfile {
  std::string model_id;
  std::string family;
  double param_count_b = 0.0;
  /// Quality in [0, 1] per supported capability.
  std::map<std::string, double> quality;
  double price_per_million_tokens = 0.0;
  Moments latency_per_token;  ///< ms per token
  Hosting hosting = Hosting::Local;

  bool supports(std::string_view capability) const { return quality.contains(std::string(capability)); }
};

struct EngineProfile {
  std::string engine_id;
  EngineClass engine_class = EngineClass::Relational;
  std::set<std::string> supported_capabilities;
  Moments startup_latency;  ///< ms
  Moments unit_rate;        ///< records per ms
  double monetary_rate = 0.0;  ///< USD per second
  double energy_rate = 0.0;    ///< joules per second
};

/// Immutable after construction; lookups are safe from any thread.
class Pools {
 public:
  Pools() = default;
  /// Throws ConfigError when a profile breaks its invariants or ids repeat.
  Pools(std::vector<ModelProfile> models, std::vector<EngineProfile> engines);

  const ModelProfile* find_model(std::string_view id) const;
  const EngineProfile* find_engine(std::string_view id) const;
  std::span<const ModelProfile> models() const { return models_; }
  std::span<const EngineProfile> engines() const { return engines_; }
  bool empty() const { return models_.empty() && engines_.empty(); }

 private:
  std::vector<ModelProfile> models_;
  std::vector<EngineProfile> engines_;
  std::unordered_map<std::string, std::size_t> model_index_;
  std::unordered_map<std::string, std::size_t> engine_index_;
};

/// Bindings that can execute `agent`, sorted by (engine, model). Empty means
/// the agent is unsatisfiable with these pools.
std::vector<Binding> candidate_bindings(const AgentSpec& agent, const Pools& pools);

/// True iff `b` satisfies the capability and engine-class rules for `agent`.
bool binding_admissible(const AgentSpec& agent, const Binding& b, const Pools& pools);

struct SpaceSize {
  std::uint64_t count = 0;
  /// Set when some agent has no candidate binding (count is then 0).
  std::optional<std::string> unsatisfiable_agent;
  /// Set when the exact count exceeds 64 bits.
  bool overflow = false;
};

/// Sum over variants of the product over nodes of |candidate_bindings|.
SpaceSize space_size(std::span<const AbstractWorkflow> variants, const Registry& registry, const Pools& pools);

} // namespace agentplan
