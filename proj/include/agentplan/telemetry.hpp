#pragma once

#include <cstdint>
#include <string>

#include "agentplan/workflow.hpp"

namespace agentplan {

/// One executed node in one simulated run.
struct TelemetryRecord {
  std::string run_id;
  std::string agent_id;
  Binding binding;
  double latency_ms = 0.0;
  double tokens = 0.0;
  double monetary_usd = 0.0;
  double energy_j = 0.0;
  bool cache_hit = false;
  double timestamp = 0.0;  ///< logical ms at node start

  friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

} // namespace agentplan
