#include "agentplan/workload_gen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "agentplan/hash.hpp"
#include "agentplan/io.hpp"
#include "agentplan/simulator.hpp"

namespace agentplan {

namespace {

// Published mixes are rounded percentages; sampling renormalizes.
constexpr double kSumTolerance = 0.02;

// Fewest nodes for which each label is realizable without being classified
// as something else (smaller graphs collapse into chain or orchestrated-dag).
int min_nodes(StructureLabel label) {
  switch (label) {
    case StructureLabel::BranchingChain: return 4;
    case StructureLabel::Tree: return 5;
    case StructureLabel::Dag: return 4;
    default: return 3;
  }
}

const std::vector<std::pair<std::string, EngineClass>>& deterministic_classes() {
  static const std::vector<std::pair<std::string, EngineClass>> classes{
      {"relational", EngineClass::Relational},
      {"analytics", EngineClass::Analytics},
      {"vector", EngineClass::Vector},
      {"streaming", EngineClass::Streaming},
  };
  return classes;
}

std::string class_suffix(EngineClass c) {
  for (const auto& [name, cls] : deterministic_classes())
    if (cls == c) return name;
  return "llm";
}

const std::string kOrchestrator = "orchestrator";
constexpr std::string_view kRole = "records";

} // namespace

// ---------------------------------------------------------------------------
// Profile

WorkloadProfile WorkloadProfile::defaults() {
  WorkloadProfile p;
  p.structure_mix = {
      {StructureLabel::Chain, 0.34},  {StructureLabel::Dag, 0.25},    {StructureLabel::Tree, 0.24},
      {StructureLabel::BranchingChain, 0.06}, {StructureLabel::Hybrid, 0.04}, {StructureLabel::PubSub, 0.03},
      {StructureLabel::Cyclic, 0.02}, {StructureLabel::Mesh, 0.01},
  };
  p.inclusion = {
      {"data-ingestion", 1.00},       {"connect-sources", 1.00}, {"entity-extraction", 0.77},
      {"generate-report", 0.70},      {"send-report", 0.61},     {"unstructured-analysis", 0.55},
      {"entity-linkage", 0.44},
  };
  p.engine_mix = {
      {EngineClass::Relational, 0.60},
      {EngineClass::Analytics, 0.23},
      {EngineClass::Vector, 0.09},
      {EngineClass::Streaming, 0.08},
  };
  return p;
}

void WorkloadProfile::check() const {
  auto distribution = [](const auto& entries, const char* what) {
    if (entries.empty()) throw GenerationFault(std::string(what) + " is empty");
    double sum = 0;
    for (const auto& [_, p] : entries) {
      if (!(p >= 0.0 && p <= 1.0)) throw GenerationFault(std::string(what) + " has a probability outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw GenerationFault(std::string(what) + " sums to " + std::to_string(sum) + ", not 1");
  };
  distribution(structure_mix, "structure mix");
  distribution(engine_mix, "engine-class mix");
  for (const auto& [c, _] : engine_mix)
    if (is_inference(c)) throw GenerationFault("engine-class mix names an inference class");
  for (const auto& [task, p] : inclusion) {
    if (!(p >= 0.0 && p <= 1.0)) throw GenerationFault("inclusion probability of '" + task + "' outside [0, 1]");
    const auto& cat = task_catalog();
    if (std::find(cat.begin(), cat.end(), task) == cat.end())
      throw GenerationFault("inclusion names unknown task '" + task + "'");
  }
  if (!(deterministic_fraction >= 0.0 && deterministic_fraction <= 1.0))
    throw GenerationFault("deterministic fraction outside [0, 1]");
  if (min_tasks < 3 || max_tasks < min_tasks || mode_tasks < min_tasks || mode_tasks > max_tasks)
    throw GenerationFault("task-count range must satisfy 3 <= min <= mode <= max");
  if (static_cast<std::size_t>(max_tasks) > task_catalog().size())
    throw GenerationFault("max_tasks exceeds the task catalog");
}

WorkloadProfile WorkloadProfile::from_json(const nlohmann::json& j) {
  WorkloadProfile p = defaults();
  try {
    if (j.contains("structure_mix")) {
      p.structure_mix.clear();
      for (const auto& [k, v] : j.at("structure_mix").items()) {
        auto label = parse_structure_label(k);
        if (!label) throw ConfigError("profile: unknown structure '" + k + "'");
        p.structure_mix.emplace_back(*label, v.get<double>());
      }
    }
    if (j.contains("inclusion")) {
      p.inclusion.clear();
      for (const auto& [k, v] : j.at("inclusion").items()) p.inclusion.emplace_back(k, v.get<double>());
    }
    if (j.contains("engine_mix")) {
      p.engine_mix.clear();
      for (const auto& [k, v] : j.at("engine_mix").items()) {
        auto cls = parse_engine_class(k);
        if (!cls) throw ConfigError("profile: unknown engine class '" + k + "'");
        p.engine_mix.emplace_back(*cls, v.get<double>());
      }
    }
    p.deterministic_fraction = j.value("deterministic_fraction", p.deterministic_fraction);
    p.min_tasks = j.value("min_tasks", p.min_tasks);
    p.max_tasks = j.value("max_tasks", p.max_tasks);
    p.mode_tasks = j.value("mode_tasks", p.mode_tasks);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("profile: ") + e.what());
  }
  return p;
}

nlohmann::json WorkloadProfile::to_json() const {
  nlohmann::json mix = nlohmann::json::object();
  for (const auto& [l, p] : structure_mix) mix[std::string(agentplan::to_string(l))] = p;
  nlohmann::json inc = nlohmann::json::object();
  for (const auto& [t, p] : inclusion) inc[t] = p;
  nlohmann::json eng = nlohmann::json::object();
  for (const auto& [c, p] : engine_mix) eng[std::string(agentplan::to_string(c))] = p;
  return {{"structure_mix", mix},
          {"inclusion", inc},
          {"engine_mix", eng},
          {"deterministic_fraction", deterministic_fraction},
          {"min_tasks", min_tasks},
          {"max_tasks", max_tasks},
          {"mode_tasks", mode_tasks}};
}

std::vector<double> task_count_weights(const WorkloadProfile& p) {
  std::vector<double> w;
  const double lo = p.min_tasks - 1;
  const double hi = p.max_tasks + 1;
  for (int k = p.min_tasks; k <= p.max_tasks; ++k)
    w.push_back(k <= p.mode_tasks ? (k - lo) / (p.mode_tasks - lo) : (hi - k) / (hi - p.mode_tasks));
  return w;
}

// ---------------------------------------------------------------------------
// Registry and pools

const std::vector<std::string>& task_catalog() {
  static const std::vector<std::string> catalog{
      "data-ingestion",  "connect-sources",       "data-validation",    "deduplication",   "schema-mapping",
      "filtering",       "entity-extraction",     "unstructured-analysis", "classification", "sentiment-analysis",
      "translation",     "summarization",         "entity-linkage",     "vector-search",   "anomaly-detection",
      "kpi-computation", "generate-report",       "send-report",
  };
  return catalog;
}

namespace {

NodeWorkload task_workload(const std::string& task) {
  const auto h = fnv1a(task, fnv1a("workload"));
  NodeWorkload wl;
  wl.input_cardinality = 500.0 + static_cast<double>(h % 10) * 500.0;
  wl.tokens_in = 500.0 + static_cast<double>((h >> 8) % 6) * 500.0;
  wl.tokens_out = 100.0 + static_cast<double>((h >> 16) % 8) * 100.0;
  return wl;
}

} // namespace

Registry generator_registry() {
  std::vector<Capability> caps;
  std::vector<AgentSpec> agents;
  auto add = [&](const std::string& id, const std::string& task, Determinism d) {
    caps.push_back({id, d == Determinism::Stochastic ? Modality::UnstructuredText : Modality::Structured});
    AgentSpec a;
    a.agent_id = id;
    a.capability = id;
    a.description = task + " task";
    a.input_role = std::string(kRole);
    a.output_role = std::string(kRole);
    a.determinism = d;
    a.default_workload = task_workload(task);
    agents.push_back(std::move(a));
  };
  for (const auto& task : task_catalog()) {
    for (const auto& [suffix, _] : deterministic_classes()) add(task + "/" + suffix, task, Determinism::Deterministic);
    add(task + "/llm", task, Determinism::Stochastic);
  }
  caps.push_back({std::string(kOrchestrationCapability), Modality::Mixed});
  AgentSpec hub;
  hub.agent_id = kOrchestrator;
  hub.capability = std::string(kOrchestrationCapability);
  hub.description = "dispatches tasks to every agent";
  hub.input_role = std::string(kRole);
  hub.output_role = std::string(kRole);
  hub.default_workload = {100.0, 0.0, 0.0};
  agents.push_back(std::move(hub));
  return Registry(std::move(caps), std::move(agents));
}

Pools generator_pools() {
  struct EngineRow {
    const char* id;
    EngineClass cls;
    double startup;
    double rate;
    double money;
    double energy;
  };
  static const EngineRow rows[] = {
      {"postgres", EngineClass::Relational, 10, 8, 0.0012, 35},
      {"duckdb", EngineClass::Relational, 3, 12, 0.0008, 25},
      {"spark", EngineClass::Analytics, 150, 60, 0.004, 120},
      {"clickhouse", EngineClass::Analytics, 20, 30, 0.002, 60},
      {"milvus", EngineClass::Vector, 15, 15, 0.0015, 40},
      {"pinecone", EngineClass::Vector, 25, 25, 0.003, 20},
      {"flink", EngineClass::Streaming, 40, 40, 0.002, 70},
      {"kafka-streams", EngineClass::Streaming, 10, 20, 0.001, 45},
      {"vllm-local", EngineClass::InferenceLocal, 50, 1, 0.0015, 300},
      {"cloud-api", EngineClass::InferenceApi, 150, 1, 0.0, 0},
  };
  std::vector<EngineProfile> engines;
  for (const auto& r : rows) {
    EngineProfile e;
    e.engine_id = r.id;
    e.engine_class = r.cls;
    e.startup_latency = {r.startup, 0.01 * r.startup * r.startup};
    e.unit_rate = {r.rate, is_inference(r.cls) ? 0.0 : 0.0025 * r.rate * r.rate};
    e.monetary_rate = r.money;
    e.energy_rate = r.energy;
    for (const auto& task : task_catalog()) {
      if (is_inference(r.cls))
        e.supported_capabilities.insert(task + "/llm");
      else
        e.supported_capabilities.insert(task + "/" + class_suffix(r.cls));
    }
    if (r.cls == EngineClass::Streaming) e.supported_capabilities.insert(std::string(kOrchestrationCapability));
    engines.push_back(std::move(e));
  }

  struct ModelRow {
    const char* id;
    const char* family;
    double params;
    Hosting hosting;
    double price;
    double per_token;
    double quality;
  };
  static const ModelRow models_rows[] = {
      {"llama3-8b", "llama", 8, Hosting::Local, 0.0, 0.9, 0.78},
      {"qwen2-7b", "qwen", 7, Hosting::Local, 0.0, 0.7, 0.80},
      {"mistral-7b", "mistral", 7, Hosting::Api, 0.25, 0.5, 0.84},
      {"claude-3.5-sonnet", "claude", 0, Hosting::Api, 6.0, 0.6, 0.93},
  };
  std::vector<ModelProfile> models;
  for (std::size_t i = 0; i < std::size(models_rows); ++i) {
    const auto& r = models_rows[i];
    ModelProfile m;
    m.model_id = r.id;
    m.family = r.family;
    m.param_count_b = r.params;
    m.hosting = r.hosting;
    m.price_per_million_tokens = r.price;
    m.latency_per_token = {r.per_token, 0.0025 * r.per_token * r.per_token};
    for (const auto& task : task_catalog()) {
      const auto h = fnv1a(task, fnv1a("coverage"));
      if (h % 8 == i) continue;  // about half the tasks lose one of the four models
      const double jitter = static_cast<double>((h >> 12) % 7) * 0.01 - 0.03;
      m.quality[task + "/llm"] = std::clamp(r.quality + jitter, 0.0, 1.0);
    }
    models.push_back(std::move(m));
  }
  return Pools(std::move(models), std::move(engines));
}

// ---------------------------------------------------------------------------
// Generation

namespace {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void random_tree(Rng& rng, std::size_t k, std::vector<Edge>& edges, const std::vector<std::string>& ids) {
  for (std::size_t i = 1; i < k; ++i) edges.push_back({ids[uniform(rng, 0, i - 1)], ids[i], EdgeKind::Data, false});
}

std::vector<Edge> wire(Rng& rng, StructureLabel label, const std::vector<std::string>& ids) {
  const std::size_t k = ids.size();
  std::vector<Edge> edges;
  auto chain = [&] {
    for (std::size_t i = 0; i + 1 < k; ++i) edges.push_back({ids[i], ids[i + 1], EdgeKind::Data, false});
  };
  switch (label) {
    case StructureLabel::Chain: chain(); break;
    case StructureLabel::BranchingChain: {
      const std::size_t branch = uniform(rng, 1, std::max<std::size_t>(1, (k - 2) / 2));
      const std::size_t spine = k - branch;
      for (std::size_t i = 0; i + 1 < spine; ++i) edges.push_back({ids[i], ids[i + 1], EdgeKind::Data, false});
      edges.push_back({ids[uniform(rng, 0, spine - 2)], ids[spine], EdgeKind::Data, false});
      for (std::size_t i = spine; i + 1 < k; ++i) edges.push_back({ids[i], ids[i + 1], EdgeKind::Data, false});
      break;
    }
    case StructureLabel::Tree: random_tree(rng, k, edges, ids); break;
    case StructureLabel::Dag:
    case StructureLabel::Hybrid: {
      random_tree(rng, k, edges, ids);
      const std::size_t extra = uniform(rng, 1, std::max<std::size_t>(1, k / 2));
      for (std::size_t e = 0; e < extra; ++e) {
        const std::size_t j = uniform(rng, 2, k - 1);
        const std::size_t i = uniform(rng, 0, j - 1);
        Edge cand{ids[i], ids[j], EdgeKind::Data, false};
        if (std::find(edges.begin(), edges.end(), cand) == edges.end()) edges.push_back(cand);
      }
      break;
    }
    case StructureLabel::PubSub: {
      random_tree(rng, k, edges, ids);
      const std::size_t subscribers = uniform(rng, 1, 2);
      for (std::size_t s = 0; s < subscribers; ++s)
        edges.push_back({ids[k - 1], ids[uniform(rng, 0, k - 2)], EdgeKind::Feedback, false});
      break;
    }
    case StructureLabel::Cyclic:
      chain();
      edges.push_back({ids[k - 1], ids[0], EdgeKind::Feedback, false});
      break;
    case StructureLabel::Mesh: {
      random_tree(rng, k, edges, ids);
      const std::size_t back = uniform(rng, 2, std::max<std::size_t>(2, k - 1));
      for (std::size_t b = 0; b < back; ++b) {
        const std::size_t i = uniform(rng, 1, k - 1);
        edges.push_back({ids[i], ids[uniform(rng, 0, i - 1)], EdgeKind::Feedback, false});
      }
      break;
    }
    default: chain();
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

bool tagged(StructureLabel l) {
  return l == StructureLabel::PubSub || l == StructureLabel::Cyclic || l == StructureLabel::Mesh ||
         l == StructureLabel::Hybrid;
}

} // namespace

bool excluded_from_optimization(const AbstractWorkflow& w) {
  return w.tag && (*w.tag == StructureLabel::PubSub || *w.tag == StructureLabel::Cyclic ||
                   *w.tag == StructureLabel::Mesh);
}

std::vector<AbstractWorkflow> generate(std::size_t n, const WorkloadProfile& profile, std::uint64_t seed) {
  if (n < 1) throw GenerationFault("workflow count must be >= 1");
  profile.check();
  static const Registry registry = generator_registry();
  const auto& catalog = task_catalog();

  std::vector<double> mix;
  for (const auto& [_, p] : profile.structure_mix) mix.push_back(p);
  std::vector<double> engine_w;
  for (const auto& [_, p] : profile.engine_mix) engine_w.push_back(p);
  const auto count_w = task_count_weights(profile);

  Rng rng(hash_combine(seed, fnv1a("workload-gen")));
  std::discrete_distribution<std::size_t> draw_label(mix.begin(), mix.end());
  std::discrete_distribution<std::size_t> draw_engine(engine_w.begin(), engine_w.end());
  std::discrete_distribution<std::size_t> draw_count(count_w.begin(), count_w.end());
  std::bernoulli_distribution draw_det(profile.deterministic_fraction);

  std::vector<AbstractWorkflow> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = profile.structure_mix[draw_label(rng)].first;
    std::size_t count = static_cast<std::size_t>(profile.min_tasks) + draw_count(rng);
    count = std::max<std::size_t>(count, static_cast<std::size_t>(min_nodes(label)));

    std::set<std::string> chosen;
    for (const auto& [task, p] : profile.inclusion)
      if (std::bernoulli_distribution(p)(rng)) chosen.insert(task);
    count = std::min(std::max(count, chosen.size()), catalog.size());
    std::vector<std::string> rest;
    for (const auto& t : catalog)
      if (!chosen.contains(t)) rest.push_back(t);
    std::shuffle(rest.begin(), rest.end(), rng);
    for (std::size_t r = 0; chosen.size() < count; ++r) chosen.insert(rest[r]);

    std::vector<std::string> ids;
    for (const auto& t : catalog) {
      if (!chosen.contains(t)) continue;
      if (draw_det(rng))
        ids.push_back(t + "/" + class_suffix(profile.engine_mix[draw_engine(rng)].first));
      else
        ids.push_back(t + "/llm");
    }

    AbstractWorkflow w;
    char name[32];
    std::snprintf(name, sizeof name, "wf-%05zu", i);
    w.name = name;
    w.nodes = ids;
    w.input_key = "source-" + std::to_string(uniform(rng, 0, 7));
    if (tagged(label)) w.tag = label;
    constexpr int kAttempts = 500;
    bool ok = false;
    for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
      w.edges = wire(rng, label, ids);
      ok = validate(w, registry).ok() && classify_structure(w) == label;
    }
    if (!ok) throw GenerationFault("could not wire a " + std::string(to_string(label)) + " over " +
                                   std::to_string(ids.size()) + " tasks");
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bench

double BenchPass::symbolic_hit_rate() const {
  return cache.symbolic.lookups == 0 ? 0.0
                                     : static_cast<double>(cache.symbolic.hits) / static_cast<double>(cache.symbolic.lookups);
}

double BenchPass::deterministic_hit_rate() const {
  std::size_t nodes = 0;
  std::size_t hits = 0;
  for (const auto& r : rows) {
    nodes += r.deterministic_nodes;
    hits += r.deterministic_hits;
  }
  return nodes == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(nodes);
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

BenchPass run_pass(const std::vector<AbstractWorkflow>& workflows, const Registry& registry, const Pools& pools,
                   const BenchOptions& opts, MMCache* cache) {
  BenchPass pass;
  Simulator sim(registry, pools);
  PlannerOptions popts = opts.planner;
  popts.cache = cache;
  const auto policy = opts.policy ? *opts.policy : SelectionPolicy::balanced(opts.objectives);
  const PlanningInputs in{registry, pools, nullptr};

  for (const auto& w : workflows) {
    BenchRow row;
    row.name = w.name;
    row.label = classify_structure(w);
    row.nodes = w.nodes.size();
    if (excluded_from_optimization(w)) {
      row.skipped = "feedback category";
      pass.rows.push_back(std::move(row));
      continue;
    }
    const auto variants = rewrite_variants(w, registry, popts.max_variants);
    const auto size = space_size(variants, registry, pools);
    row.space = size.count;
    if (size.overflow || size.count > opts.max_space) {
      row.skipped = "space too large";
      pass.rows.push_back(std::move(row));
      continue;
    }

    auto t0 = Clock::now();
    const auto frontier = optimize(w, opts.objectives, in, popts);
    const auto& chosen = select(frontier, policy, cache);
    row.planning_ms = ms_since(t0);
    row.frontier_size = frontier.size();
    row.frontier_digest = frontier.digest();
    row.selected = chosen.hash;

    t0 = Clock::now();
    const auto result = sim.run(chosen.plan, {opts.seed, w.name, 0, 0.0}, cache);
    row.run_ms = ms_since(t0);
    row.latency_ms = result.latency_ms;
    row.monetary_usd = result.monetary_usd;
    row.tokens = result.tokens;
    row.energy_j = result.energy_j;
    row.cache_hits = result.cache_hits;
    for (const auto& r : result.telemetry) {
      if (registry.find_agent(r.agent_id)->stochastic()) continue;
      ++row.deterministic_nodes;
      if (r.cache_hit) ++row.deterministic_hits;
    }

    pass.latency_ms += row.latency_ms;
    pass.monetary_usd += row.monetary_usd;
    pass.tokens += row.tokens;
    pass.energy_j += row.energy_j;
    pass.planning_ms += row.planning_ms;
    pass.run_ms += row.run_ms;
    pass.rows.push_back(std::move(row));
  }
  if (cache) pass.cache = cache->stats();
  return pass;
}

nlohmann::json pass_json(const BenchPass& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : p.rows) {
    nlohmann::json j{{"name", r.name}, {"label", std::string(to_string(r.label))}, {"nodes", r.nodes}};
    if (r.skipped) {
      j["skipped"] = *r.skipped;
    } else {
      j["space"] = r.space;
      j["frontier_size"] = r.frontier_size;
      j["frontier_digest"] = to_hex(r.frontier_digest);
      j["selected"] = to_hex(r.selected);
      j["latency_ms"] = r.latency_ms;
      j["monetary_usd"] = r.monetary_usd;
      j["tokens"] = r.tokens;
      j["energy_j"] = r.energy_j;
      j["cache_hits"] = r.cache_hits;
    }
    rows.push_back(std::move(j));
  }
  return {{"rows", rows},
          {"totals",
           {{"latency_ms", p.latency_ms}, {"monetary_usd", p.monetary_usd}, {"tokens", p.tokens}, {"energy_j", p.energy_j}}},
          {"cache", io::to_json(p.cache)},
          {"symbolic_hit_rate", p.symbolic_hit_rate()},
          {"deterministic_hit_rate", p.deterministic_hit_rate()}};
}

nlohmann::json pass_timing(const BenchPass& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : p.rows)
    if (!r.skipped) rows.push_back({{"name", r.name}, {"planning_ms", r.planning_ms}, {"run_ms", r.run_ms}});
  const double seconds = p.run_ms / 1000.0;
  return {{"planning_ms", p.planning_ms},
          {"run_ms", p.run_ms},
          {"total_ms", p.planning_ms + p.run_ms},
          {"runs_per_second", seconds > 0 ? static_cast<double>(rows.size()) / seconds : 0.0},
          {"rows", rows}};
}

} // namespace

BenchReport bench(const std::vector<AbstractWorkflow>& workflows, const Registry& registry, const Pools& pools,
                  const BenchOptions& opts) {
  BenchReport report;
  report.workflows = workflows.size();
  if (opts.cache) {
    MMCache cache(opts.cache_config);
    report.first = run_pass(workflows, registry, pools, opts, &cache);
    cache.reset_stats();
    report.replay = run_pass(workflows, registry, pools, opts, &cache);
    report.baseline = run_pass(workflows, registry, pools, opts, nullptr);
    for (std::size_t i = 0; i < workflows.size(); ++i) {
      const auto& a = report.first.rows[i];
      const auto& b = report.baseline->rows[i];
      if (a.skipped != b.skipped || a.frontier_digest != b.frontier_digest || a.selected != b.selected)
        report.transparent = false;
    }
  } else {
    report.first = run_pass(workflows, registry, pools, opts, nullptr);
    report.replay = run_pass(workflows, registry, pools, opts, nullptr);
  }
  return report;
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json passes{{"first", pass_json(first)}, {"replay", pass_json(replay)}};
  nlohmann::json timing{{"first", pass_timing(first)}, {"replay", pass_timing(replay)}};
  nlohmann::json j{{"workflows", workflows}, {"transparent", transparent}};
  if (baseline) {
    passes["baseline"] = pass_json(*baseline);
    timing["baseline"] = pass_timing(*baseline);
    j["deltas"] = {{"latency_ms", baseline->latency_ms - first.latency_ms},
                   {"monetary_usd", baseline->monetary_usd - first.monetary_usd},
                   {"tokens", baseline->tokens - first.tokens},
                   {"energy_j", baseline->energy_j - first.energy_j}};
    timing["delta_total_ms"] =
        (baseline->planning_ms + baseline->run_ms) - (first.planning_ms + first.run_ms);
  }
  j["passes"] = passes;
  j["timing"] = timing;
  return j;
}

} // namespace agentplan
