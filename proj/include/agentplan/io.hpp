#pragma once

// JSON file formats for registries, pools, workflows, plans, frontiers and
// telemetry, plus Graphviz export.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentplan/cost_model.hpp"
#include "agentplan/mmcache.hpp"
#include "agentplan/planner.hpp"
#include "agentplan/search_space.hpp"
#include "agentplan/telemetry.hpp"
#include "agentplan/workflow.hpp"

namespace agentplan::io {

using nlohmann::json;

/// Throws ConfigError when the file is missing or not valid JSON.
json read_json(const std::filesystem::path& path);
/// Writes with 2-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

// All *_from_json functions throw ConfigError on malformed input.

Registry registry_from_json(const json& j);
json to_json(const Registry& r);
Registry load_registry(const std::filesystem::path& path);

Pools pools_from_json(const json& models, const json& engines);
json models_to_json(const Pools& p);
json engines_to_json(const Pools& p);
Pools load_pools(const std::filesystem::path& models, const std::filesystem::path& engines);

AbstractWorkflow workflow_from_json(const json& j);
json to_json(const AbstractWorkflow& w);
AbstractWorkflow load_workflow(const std::filesystem::path& path);

json to_json(const Binding& b);
Binding binding_from_json(const std::string& agent_id, const json& j);

json to_json(const ExecutableWorkflow& ew);
ExecutableWorkflow executable_from_json(const json& j);

json to_json(const CostDistribution& c, const ObjectiveSet& o = ObjectiveSet::all());
json to_json(const ParetoFrontier& f);

json to_json(const TelemetryRecord& t);
TelemetryRecord telemetry_from_json(const json& j);
/// One compact JSON object per line.
void write_jsonl(std::ostream& os, const std::vector<TelemetryRecord>& records);

json to_json(const TierCounters& c);
json to_json(const CacheStats& s);

std::string to_dot(const ExecutableWorkflow& ew);
std::string to_dot(const AbstractWorkflow& w);

} // namespace agentplan::io
