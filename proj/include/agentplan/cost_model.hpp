#pragma once

// Unified cost model: per-node mean/variance estimates from profiles,
// composition over the workflow graph, and EWMA statistics from telemetry.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agentplan/search_space.hpp"
#include "agentplan/telemetry.hpp"
#include "agentplan/workflow.hpp"

namespace agentplan {

/// Cost dimensions, all minimized. Accuracy is carried as error = 1 - accuracy.
enum class Dim : std::size_t { Latency = 0, Monetary = 1, Error = 2, Tokens = 3, Energy = 4 };
inline constexpr std::size_t kDims = 5;
inline constexpr std::array<Dim, kDims> kAllDims{Dim::Latency, Dim::Monetary, Dim::Error, Dim::Tokens, Dim::Energy};

constexpr std::size_t idx(Dim d) { return static_cast<std::size_t>(d); }

/// "latency_ms", "monetary_usd", "error", "tokens", "energy_j".
std::string_view dim_name(Dim d);
/// Accepts the canonical names and the short forms latency/monetary/cost/
/// error/tokens/energy.
std::optional<Dim> parse_dim(std::string_view s);

/// Ordered, duplicate-free, non-empty subset of the five dimensions. The
/// order is always the canonical dimension order.
class ObjectiveSet {
 public:
  /// Throws std::invalid_argument when empty or when a dimension repeats.
  ObjectiveSet(std::initializer_list<Dim> dims);
  explicit ObjectiveSet(std::span<const Dim> dims);

  static ObjectiveSet all();
  /// Comma-separated names. Throws std::invalid_argument on unknown names,
  /// duplicates or an empty list.
  static ObjectiveSet parse(std::string_view csv);

  bool contains(Dim d) const { return (mask_ >> idx(d)) & 1U; }
  std::span<const Dim> dims() const { return {dims_.data(), count_}; }
  std::size_t size() const { return count_; }
  std::uint32_t mask() const { return mask_; }
  std::string to_string() const;

  friend bool operator==(const ObjectiveSet& a, const ObjectiveSet& b) { return a.mask_ == b.mask_; }

 private:
  void init(std::span<const Dim> dims);

  std::array<Dim, kDims> dims_{};
  std::size_t count_ = 0;
  std::uint32_t mask_ = 0;
};

struct CostDistribution {
  std::array<double, kDims> mean{};
  std::array<double, kDims> var{};

  double m(Dim d) const { return mean[idx(d)]; }
  double v(Dim d) const { return var[idx(d)]; }
  double& m(Dim d) { return mean[idx(d)]; }
  double& v(Dim d) { return var[idx(d)]; }

  static CostDistribution zero() { return {}; }
  friend bool operator==(const CostDistribution&, const CostDistribution&) = default;
};

/// Clamps an error variance so that mean +- sqrt(var) stays inside [0, 1].
double clamp_error_variance(double mean, double var);

/// Additive dimensions sum means and variances (independence); error follows
/// the noisy-chain rule 1 - (1 - a)(1 - b).
CostDistribution compose_sequential(const CostDistribution& x, const CostDistribution& y);

/// As compose_sequential, except latency takes the larger mean and that
/// branch's variance (ties take the larger variance).
CostDistribution compose_parallel(const CostDistribution& x, const CostDistribution& y);

/// Per-(agent, binding) EWMA of observed telemetry. Reads may run
/// concurrently; updates are serialized.
class Statistics {
 public:
  static constexpr double kDefaultAlpha = 0.3;

  /// Optional admission check; records for which it returns false are
  /// rejected and counted.
  using KnownFn = std::function<bool(const std::string& agent_id, const Binding& binding)>;

  explicit Statistics(double alpha = kDefaultAlpha, KnownFn known = {});
  Statistics(const Statistics& other);
  Statistics& operator=(const Statistics& other);

  struct Observed {
    /// EWMA per dimension; only latency, monetary, tokens and energy are
    /// ever observed.
    std::array<std::optional<double>, kDims> ewma{};
    std::size_t samples = 0;
  };

  /// Folds one record in. Returns false when rejected (unknown binding,
  /// negative or non-finite magnitudes). Cache-hit records say nothing about
  /// the engine and are ignored without counting as rejected.
  bool update(const TelemetryRecord& t);

  std::optional<Observed> lookup(const std::string& agent_id, const std::string& binding_key) const;
  std::optional<Observed> lookup(const std::string& agent_id, const Binding& b) const {
    return lookup(agent_id, b.key());
  }

  double alpha() const { return alpha_; }
  std::size_t rejected() const;
  std::size_t size() const;

 private:
  double alpha_;
  KnownFn known_;
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, Observed> table_;
  std::size_t rejected_ = 0;
};

/// Admission check accepting bindings that name a registry agent and are
/// admissible for it under `pools`.
Statistics::KnownFn known_bindings(const Registry& registry, const Pools& pools);

/// Cost of one agent under one binding. Observed EWMAs in `stats` (if any)
/// replace the profile-derived means; variances always come from profiles.
/// Throws EstimationFault on unknown engine/model or a missing quality entry.
CostDistribution estimate_node(const AgentSpec& agent, const Binding& binding, const NodeWorkload& wl,
                               const Pools& pools, const Statistics* stats = nullptr);

struct WorkflowCostOptions {
  const Statistics* stats = nullptr;
  /// Realized costs that replace estimates for specific agents (completed
  /// nodes during re-optimization).
  const std::map<std::string, CostDistribution>* realized = nullptr;
  /// Added to an orchestration hub's latency once per outgoing data edge.
  double hub_edge_latency_ms = 0.0;
};

/// Latency composes sequentially across topo layers and in parallel within a
/// layer; the other dimensions accumulate over every node.
CostDistribution estimate_workflow(const ExecutableWorkflow& ew, const Registry& registry, const Pools& pools,
                                   const WorkflowCostOptions& opts = {});

/// Composition of per-node costs over explicit layers. Shared by the
/// estimator and the planner's final costing.
CostDistribution compose_layers(const Layers& layers,
                                const std::function<const CostDistribution&(const std::string&)>& node_cost);

} // namespace agentplan
