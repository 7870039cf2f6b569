#pragma once

// Abstract and executable workflow graphs: validation, structure
// classification, Kahn layering and dependency-preserving rewrites.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace agentplan {

enum class Modality { Structured, UnstructuredText, Stream, Vector, Image, Mixed };
enum class Determinism { Deterministic, Stochastic };
enum class EdgeKind { Data, Feedback };

enum class StructureLabel {
  Chain,
  BranchingChain,
  Tree,
  Dag,
  OrchestratedDag,
  FeedbackGraph,
  PubSub,
  Cyclic,
  Mesh,
  Hybrid,
};

std::string_view to_string(Modality m);
std::string_view to_string(Determinism d);
std::string_view to_string(EdgeKind k);
std::string_view to_string(StructureLabel s);
std::optional<Modality> parse_modality(std::string_view s);
std::optional<Determinism> parse_determinism(std::string_view s);
std::optional<EdgeKind> parse_edge_kind(std::string_view s);
std::optional<StructureLabel> parse_structure_label(std::string_view s);

/// Capability id reserved for hub agents used by orchestrator insertion.
inline constexpr std::string_view kOrchestrationCapability = "orchestration";

struct Capability {
  std::string id;
  Modality modality = Modality::Structured;
};

/// Per-node workload annotation: the cardinality and token volumes the cost
/// model consumes.
struct NodeWorkload {
  double input_cardinality = 0.0;
  double tokens_in = 0.0;
  double tokens_out = 0.0;

  friend bool operator==(const NodeWorkload&, const NodeWorkload&) = default;
};

struct AgentSpec {
  std::string agent_id;
  std::string capability;
  std::string description;
  std::string input_role;
  std::string output_role;
  Determinism determinism = Determinism::Deterministic;
  /// Used when a workflow carries no annotation for this agent.
  NodeWorkload default_workload;

  bool stochastic() const { return determinism == Determinism::Stochastic; }
};

/// The global agent catalog. Immutable once constructed.
class Registry {
 public:
  Registry() = default;
  /// Throws ConfigError on duplicate ids or agents naming unknown capabilities.
  Registry(std::vector<Capability> capabilities, std::vector<AgentSpec> agents);

  const AgentSpec* find_agent(std::string_view id) const;
  const Capability* find_capability(std::string_view id) const;
  std::span<const AgentSpec> agents() const { return agents_; }
  std::span<const Capability> capabilities() const { return capabilities_; }

  /// Agents whose capability is "orchestration", sorted by id.
  std::vector<const AgentSpec*> orchestrators() const;

 private:
  std::vector<Capability> capabilities_;
  std::vector<AgentSpec> agents_;
  std::unordered_map<std::string, std::size_t> agent_index_;
  std::unordered_map<std::string, std::size_t> capability_index_;
};

struct Edge {
  std::string from;
  std::string to;
  EdgeKind kind = EdgeKind::Data;
  /// Explicit schema adapter; allows a data edge between mismatched roles.
  bool adapter = false;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct AbstractWorkflow {
  std::string name;
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  std::map<std::string, NodeWorkload> workloads;
  /// Generator-assigned label for categories with no structural rule
  /// (pub-sub, cyclic, mesh, hybrid). Ignored for other labels.
  std::optional<StructureLabel> tag;
  /// Identifies the source data a run reads; feeds the input digest of
  /// source nodes.
  std::string input_key;
};

NodeWorkload workload_for(const AbstractWorkflow& w, const AgentSpec& agent);

struct Violation {
  enum class Kind {
    Empty,
    UnknownAgent,
    DuplicateNode,
    DanglingEdge,
    Cycle,
    RoleMismatch,
    UnknownWorkload,
    MissingBinding,
    BindingShape,
    OrderViolation,
  };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(Violation::Kind k) const;
  std::string to_string() const;
};

ValidationReport validate(const AbstractWorkflow& w, const Registry& registry);

/// Ordered parallel groups: Kahn layers over data edges, feedback edges
/// ignored, each layer sorted by agent id.
using Layers = std::vector<std::vector<std::string>>;

/// Throws InvalidWorkflow on data cycles or dangling edges.
Layers topo_order(const AbstractWorkflow& w);

/// Throws InvalidWorkflow on data cycles or dangling edges.
StructureLabel classify_structure(const AbstractWorkflow& w);

/// Structure hash over node ids and edges; the name and workloads are not
/// part of it.
std::uint64_t canonical_hash(const AbstractWorkflow& w);

/// Transitive closure of data dependencies, skipping any path through a node
/// in `excluded`.
std::set<std::pair<std::string, std::string>> data_closure(const AbstractWorkflow& w,
                                                           const std::set<std::string>& excluded = {});

/// Data edges whose target does not consume the source's output and whose
/// target input role is produced by some data ancestor; these are the edges
/// the parallelization rewrite may drop. Sorted.
std::vector<Edge> ordering_only_edges(const AbstractWorkflow& w, const Registry& registry);

/// w first, then parallelization and orchestrator-insertion rewrites in
/// ascending canonical-hash order, at most max_variants in total.
/// Throws InvalidWorkflow if w fails validation.
std::vector<AbstractWorkflow> rewrite_variants(const AbstractWorkflow& w, const Registry& registry,
                                               std::size_t max_variants);

struct Binding {
  std::string agent_id;
  std::optional<std::string> model;
  std::string engine;

  friend auto operator<=>(const Binding&, const Binding&) = default;
  std::string key() const;  ///< "engine" or "engine/model"
};

struct ExecutableWorkflow {
  AbstractWorkflow base;
  std::map<std::string, Binding> bindings;
  Layers order;
};

/// Builds the executable form with order = topo_order(base).
ExecutableWorkflow make_executable(AbstractWorkflow base, std::map<std::string, Binding> bindings);

/// Structure plus bindings; identifies a plan across frontiers and caches.
std::uint64_t plan_hash(const ExecutableWorkflow& ew);

ValidationReport validate_executable(const ExecutableWorkflow& ew, const Registry& registry);

} // namespace agentplan
