#include "agentplan/io.hpp"

#include <fstream>
#include <sstream>

#include "agentplan/error.hpp"
#include "agentplan/hash.hpp"

namespace agentplan::io {

namespace {

template <typename T>
T field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string(what) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": bad field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const char* what) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return field<T>(j, key, what);
}

Moments moments_from_json(const json& j, const char* what) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  return {field<double>(j, "mean", what), field_or<double>(j, "variance", 0.0, what)};
}

json to_json(const Moments& m) { return {{"mean", m.mean}, {"variance", m.variance}}; }

NodeWorkload workload_from_json(const json& j) {
  return {field_or<double>(j, "cardinality", 0.0, "workload"), field_or<double>(j, "tokens_in", 0.0, "workload"),
          field_or<double>(j, "tokens_out", 0.0, "workload")};
}

json to_json(const NodeWorkload& w) {
  return {{"cardinality", w.input_cardinality}, {"tokens_in", w.tokens_in}, {"tokens_out", w.tokens_out}};
}

const json& array_field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array())
    throw ConfigError(std::string(what) + ": expected an array '" + key + "'");
  return j.at(key);
}

std::string dot_id(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

} // namespace

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// Registry

Registry registry_from_json(const json& j) {
  std::vector<Capability> caps;
  for (const auto& c : array_field(j, "capabilities", "registry")) {
    Capability cap;
    cap.id = field<std::string>(c, "id", "capability");
    const auto m = field_or<std::string>(c, "modality", "structured", "capability");
    auto parsed = parse_modality(m);
    if (!parsed) throw ConfigError("capability '" + cap.id + "': unknown modality '" + m + "'");
    cap.modality = *parsed;
    caps.push_back(std::move(cap));
  }
  std::vector<AgentSpec> agents;
  for (const auto& a : array_field(j, "agents", "registry")) {
    AgentSpec s;
    s.agent_id = field<std::string>(a, "agent_id", "agent");
    s.capability = field<std::string>(a, "capability", "agent");
    s.description = field_or<std::string>(a, "description", "", "agent");
    s.input_role = field<std::string>(a, "input_role", "agent");
    s.output_role = field<std::string>(a, "output_role", "agent");
    const auto d = field<std::string>(a, "determinism", "agent");
    auto det = parse_determinism(d);
    if (!det) throw ConfigError("agent '" + s.agent_id + "': unknown determinism '" + d + "'");
    s.determinism = *det;
    if (a.contains("default_workload")) s.default_workload = workload_from_json(a.at("default_workload"));
    agents.push_back(std::move(s));
  }
  return Registry(std::move(caps), std::move(agents));
}

json to_json(const Registry& r) {
  json caps = json::array();
  for (const auto& c : r.capabilities())
    caps.push_back({{"id", c.id}, {"modality", std::string(to_string(c.modality))}});
  json agents = json::array();
  for (const auto& a : r.agents())
    agents.push_back({{"agent_id", a.agent_id},
                      {"capability", a.capability},
                      {"description", a.description},
                      {"input_role", a.input_role},
                      {"output_role", a.output_role},
                      {"determinism", std::string(to_string(a.determinism))},
                      {"default_workload", to_json(a.default_workload)}});
  return {{"capabilities", caps}, {"agents", agents}};
}

Registry load_registry(const std::filesystem::path& path) { return registry_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Pools

Pools pools_from_json(const json& models_j, const json& engines_j) {
  std::vector<ModelProfile> models;
  for (const auto& m : array_field(models_j, "models", "models")) {
    ModelProfile p;
    p.model_id = field<std::string>(m, "model_id", "model");
    p.family = field_or<std::string>(m, "family", "", "model");
    p.param_count_b = field_or<double>(m, "param_count_b", 0.0, "model");
    const auto h = field_or<std::string>(m, "hosting", "local", "model");
    auto hosting = parse_hosting(h);
    if (!hosting) throw ConfigError("model '" + p.model_id + "': unknown hosting '" + h + "'");
    p.hosting = *hosting;
    p.price_per_million_tokens = field<double>(m, "price_per_million_tokens", "model");
    if (!m.contains("latency_per_token")) throw ConfigError("model '" + p.model_id + "': missing latency_per_token");
    p.latency_per_token = moments_from_json(m.at("latency_per_token"), "model latency_per_token");
    p.quality = field_or<std::map<std::string, double>>(m, "quality", {}, "model");
    models.push_back(std::move(p));
  }
  std::vector<EngineProfile> engines;
  for (const auto& e : array_field(engines_j, "engines", "engines")) {
    EngineProfile p;
    p.engine_id = field<std::string>(e, "engine_id", "engine");
    const auto c = field<std::string>(e, "engine_class", "engine");
    auto cls = parse_engine_class(c);
    if (!cls) throw ConfigError("engine '" + p.engine_id + "': unknown class '" + c + "'");
    p.engine_class = *cls;
    p.supported_capabilities = field_or<std::set<std::string>>(e, "supported_capabilities", {}, "engine");
    if (!e.contains("startup_latency") || !e.contains("unit_rate"))
      throw ConfigError("engine '" + p.engine_id + "': missing startup_latency or unit_rate");
    p.startup_latency = moments_from_json(e.at("startup_latency"), "engine startup_latency");
    p.unit_rate = moments_from_json(e.at("unit_rate"), "engine unit_rate");
    p.monetary_rate = field_or<double>(e, "monetary_rate", 0.0, "engine");
    p.energy_rate = field_or<double>(e, "energy_rate", 0.0, "engine");
    engines.push_back(std::move(p));
  }
  return Pools(std::move(models), std::move(engines));
}

json models_to_json(const Pools& p) {
  json arr = json::array();
  for (const auto& m : p.models())
    arr.push_back({{"model_id", m.model_id},
                   {"family", m.family},
                   {"param_count_b", m.param_count_b},
                   {"hosting", std::string(to_string(m.hosting))},
                   {"price_per_million_tokens", m.price_per_million_tokens},
                   {"latency_per_token", to_json(m.latency_per_token)},
                   {"quality", m.quality}});
  return {{"models", arr}};
}

json engines_to_json(const Pools& p) {
  json arr = json::array();
  for (const auto& e : p.engines())
    arr.push_back({{"engine_id", e.engine_id},
                   {"engine_class", std::string(to_string(e.engine_class))},
                   {"supported_capabilities", e.supported_capabilities},
                   {"startup_latency", to_json(e.startup_latency)},
                   {"unit_rate", to_json(e.unit_rate)},
                   {"monetary_rate", e.monetary_rate},
                   {"energy_rate", e.energy_rate}});
  return {{"engines", arr}};
}

Pools load_pools(const std::filesystem::path& models, const std::filesystem::path& engines) {
  return pools_from_json(read_json(models), read_json(engines));
}

// ---------------------------------------------------------------------------
// Workflows

AbstractWorkflow workflow_from_json(const json& j) {
  AbstractWorkflow w;
  w.name = field_or<std::string>(j, "name", "", "workflow");
  w.nodes = field<std::vector<std::string>>(j, "nodes", "workflow");
  if (j.contains("edges")) {
    for (const auto& e : array_field(j, "edges", "workflow")) {
      Edge edge;
      edge.from = field<std::string>(e, "from", "edge");
      edge.to = field<std::string>(e, "to", "edge");
      const auto k = field_or<std::string>(e, "kind", "data", "edge");
      auto kind = parse_edge_kind(k);
      if (!kind) throw ConfigError("edge " + edge.from + "->" + edge.to + ": unknown kind '" + k + "'");
      edge.kind = *kind;
      edge.adapter = field_or<bool>(e, "adapter", false, "edge");
      w.edges.push_back(std::move(edge));
    }
  }
  if (j.contains("workloads")) {
    if (!j.at("workloads").is_object()) throw ConfigError("workflow: 'workloads' must be an object");
    for (const auto& [id, wl] : j.at("workloads").items()) w.workloads[id] = workload_from_json(wl);
  }
  if (j.contains("tag") && !j.at("tag").is_null()) {
    const auto t = field<std::string>(j, "tag", "workflow");
    auto label = parse_structure_label(t);
    if (!label) throw ConfigError("workflow: unknown tag '" + t + "'");
    w.tag = *label;
  }
  w.input_key = field_or<std::string>(j, "input_key", "", "workflow");
  return w;
}

json to_json(const AbstractWorkflow& w) {
  json edges = json::array();
  for (const auto& e : w.edges) {
    json je{{"from", e.from}, {"to", e.to}, {"kind", std::string(to_string(e.kind))}};
    if (e.adapter) je["adapter"] = true;
    edges.push_back(std::move(je));
  }
  json j{{"name", w.name}, {"nodes", w.nodes}, {"edges", edges}};
  if (!w.workloads.empty()) {
    json wl = json::object();
    for (const auto& [id, x] : w.workloads) wl[id] = to_json(x);
    j["workloads"] = wl;
  }
  if (w.tag) j["tag"] = std::string(to_string(*w.tag));
  if (!w.input_key.empty()) j["input_key"] = w.input_key;
  return j;
}

AbstractWorkflow load_workflow(const std::filesystem::path& path) { return workflow_from_json(read_json(path)); }

json to_json(const Binding& b) {
  json j{{"engine", b.engine}};
  if (b.model) j["model"] = *b.model;
  return j;
}

Binding binding_from_json(const std::string& agent_id, const json& j) {
  Binding b;
  b.agent_id = agent_id;
  b.engine = field<std::string>(j, "engine", "binding");
  if (j.contains("model") && !j.at("model").is_null()) b.model = field<std::string>(j, "model", "binding");
  return b;
}

json to_json(const ExecutableWorkflow& ew) {
  json bindings = json::object();
  for (const auto& [id, b] : ew.bindings) bindings[id] = to_json(b);
  return {{"structure", to_json(ew.base)}, {"bindings", bindings}, {"order", ew.order}, {"hash", to_hex(plan_hash(ew))}};
}

ExecutableWorkflow executable_from_json(const json& j) {
  if (!j.is_object() || !j.contains("structure")) throw ConfigError("plan: missing field 'structure'");
  auto base = workflow_from_json(j.at("structure"));
  std::map<std::string, Binding> bindings;
  if (j.contains("bindings"))
    for (const auto& [id, b] : j.at("bindings").items()) bindings[id] = binding_from_json(id, b);
  try {
    return make_executable(std::move(base), std::move(bindings));
  } catch (const InvalidWorkflow& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
}

json to_json(const CostDistribution& c, const ObjectiveSet& o) {
  json means = json::object();
  json vars = json::object();
  for (auto d : o.dims()) {
    means[std::string(dim_name(d))] = c.m(d);
    vars[std::string(dim_name(d))] = c.v(d);
  }
  return {{"means", means}, {"variances", vars}};
}

json to_json(const ParetoFrontier& f) {
  json entries = json::array();
  for (const auto& e : f.entries) {
    const auto cost = to_json(e.cost);
    entries.push_back({{"plan", to_json(e.plan)},
                       {"cost_means", cost["means"]},
                       {"cost_variances", cost["variances"]},
                       {"structure_label", std::string(to_string(e.structure))}});
  }
  json j{{"objectives", f.objectives.to_string()},
         {"entries", entries},
         {"truncated", f.truncated},
         {"tie_collapsed", f.tie_collapsed},
         {"digest", to_hex(f.digest())}};
  if (f.source_label) j["source_label"] = std::string(to_string(*f.source_label));
  return j;
}

// ---------------------------------------------------------------------------
// Telemetry

json to_json(const TelemetryRecord& t) {
  return {{"run_id", t.run_id},
          {"agent_id", t.agent_id},
          {"binding", to_json(t.binding)},
          {"latency_ms", t.latency_ms},
          {"tokens", t.tokens},
          {"monetary_usd", t.monetary_usd},
          {"energy_j", t.energy_j},
          {"cache_hit", t.cache_hit},
          {"timestamp", t.timestamp}};
}

TelemetryRecord telemetry_from_json(const json& j) {
  TelemetryRecord t;
  t.run_id = field<std::string>(j, "run_id", "telemetry");
  t.agent_id = field<std::string>(j, "agent_id", "telemetry");
  if (!j.contains("binding")) throw ConfigError("telemetry: missing field 'binding'");
  t.binding = binding_from_json(t.agent_id, j.at("binding"));
  t.latency_ms = field<double>(j, "latency_ms", "telemetry");
  t.tokens = field_or<double>(j, "tokens", 0.0, "telemetry");
  t.monetary_usd = field_or<double>(j, "monetary_usd", 0.0, "telemetry");
  t.energy_j = field_or<double>(j, "energy_j", 0.0, "telemetry");
  t.cache_hit = field_or<bool>(j, "cache_hit", false, "telemetry");
  t.timestamp = field_or<double>(j, "timestamp", 0.0, "telemetry");
  return t;
}

void write_jsonl(std::ostream& os, const std::vector<TelemetryRecord>& records) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

json to_json(const TierCounters& c) {
  return {{"lookups", c.lookups},     {"hits", c.hits},   {"promotions", c.promotions},
          {"evictions", c.evictions}, {"stale", c.stale}, {"rejected", c.rejected}};
}

json to_json(const CacheStats& s) {
  return {{"symbolic", to_json(s.symbolic)},     {"semantic", to_json(s.semantic)},
          {"short_tier", to_json(s.short_tier)}, {"long_tier", to_json(s.long_tier)},
          {"plan", to_json(s.plan)},             {"policy", to_json(s.policy)}};
}

// ---------------------------------------------------------------------------
// Graphviz

std::string to_dot(const AbstractWorkflow& w) {
  std::ostringstream os;
  os << "digraph " << dot_id(w.name.empty() ? "workflow" : w.name) << " {\n  rankdir=LR;\n";
  for (const auto& n : w.nodes) os << "  " << dot_id(n) << ";\n";
  for (const auto& e : w.edges) {
    os << "  " << dot_id(e.from) << " -> " << dot_id(e.to);
    if (e.kind == EdgeKind::Feedback)
      os << " [style=dashed]";
    else if (e.adapter)
      os << " [label=\"adapter\"]";
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

std::string to_dot(const ExecutableWorkflow& ew) {
  std::ostringstream os;
  os << "digraph " << dot_id(ew.base.name.empty() ? "plan" : ew.base.name) << " {\n  rankdir=LR;\n";
  for (std::size_t l = 0; l < ew.order.size(); ++l) {
    os << "  subgraph " << dot_id("cluster_layer" + std::to_string(l)) << " {\n    label=" << dot_id("layer " + std::to_string(l))
       << ";\n";
    for (const auto& n : ew.order[l]) {
      std::string label = n;
      if (auto it = ew.bindings.find(n); it != ew.bindings.end()) {
        label += "\\n" + it->second.engine;
        if (it->second.model) label += " / " + *it->second.model;
      }
      os << "    " << dot_id(n) << " [shape=box,label=\"" << label << "\"];\n";
    }
    os << "  }\n";
  }
  for (const auto& e : ew.base.edges) {
    os << "  " << dot_id(e.from) << " -> " << dot_id(e.to);
    if (e.kind == EdgeKind::Feedback) os << " [style=dashed]";
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

} // namespace agentplan::io
