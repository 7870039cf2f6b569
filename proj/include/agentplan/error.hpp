#pragma once

#include <stdexcept>
#include <string>

namespace agentplan {

/// Domain fault: the inputs are well-formed but the request cannot be
/// satisfied (unsatisfiable agent, infeasible constraints, missing quality
/// entry, ...). Maps to CLI exit status 1.
class Fault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationFault : public Fault {
 public:
  using Fault::Fault;
};

class PlanningFault : public Fault {
 public:
  using Fault::Fault;
};

class SimulationFault : public Fault {
 public:
  using Fault::Fault;
};

/// Unreadable or malformed configuration / input files. CLI exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked on a workflow that fails validation (cycle, dangling
/// edge, unknown agent).
class InvalidWorkflow : public Fault {
 public:
  using Fault::Fault;
};

} // namespace agentplan
