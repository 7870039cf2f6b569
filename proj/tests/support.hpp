#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "agentplan/io.hpp"
#include "agentplan/workflow.hpp"

namespace agentplan::testing {

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(AGENTPLAN_DATA_DIR) / rel;
}

inline std::filesystem::path golden_path(const std::string& rel) {
  return std::filesystem::path(AGENTPLAN_GOLDEN_DIR) / rel;
}

/// The customer-support triage fixture and its pools.
struct Fixture {
  Registry registry = io::load_registry(data_path("registry.json"));
  Pools pools = io::load_pools(data_path("models.json"), data_path("engines.json"));
  AbstractWorkflow workflow = io::load_workflow(data_path("workflows/support_triage.json"));

  static const Fixture& get() {
    static const Fixture f;
    return f;
  }
};

/// Path through `nodes` in order, all data edges.
inline AbstractWorkflow chain_of(const std::vector<std::string>& nodes, std::string name = "chain") {
  AbstractWorkflow w;
  w.name = std::move(name);
  w.nodes = nodes;
  for (std::size_t i = 1; i < nodes.size(); ++i) w.edges.push_back({nodes[i - 1], nodes[i], EdgeKind::Data, false});
  return w;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("agentplan-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace agentplan::testing
