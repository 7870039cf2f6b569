#include "agentplan/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "agentplan/error.hpp"
#include "agentplan/hash.hpp"
#include "agentplan/io.hpp"
#include "agentplan/monitor.hpp"
#include "agentplan/planner.hpp"
#include "agentplan/simulator.hpp"
#include "agentplan/workload_gen.hpp"

namespace agentplan {

namespace {

namespace fs = std::filesystem;
using io::json;

struct Config {
  std::string registry;
  std::string models;
  std::string engines;
  std::string workflow;
  std::string objectives = "latency,monetary,error";
  std::string policy = "balanced";
  std::optional<std::uint64_t> seed;
  double tau = 0.85;
  double delta = 0.5;
  std::size_t min_samples = 3;
  std::string out = "out";
  bool no_cache = false;
  std::size_t short_capacity = 1024;
  std::size_t long_capacity = 8192;
  std::uint64_t promote_after = 3;
  std::optional<std::uint64_t> ttl;
  std::size_t max_frontier = 0;
  std::size_t max_variants = 8;
  double hub_latency = 0.0;
  double edge_latency = 0.0;
  // run / cache-stats
  std::string plan;
  std::optional<std::size_t> index;
  std::size_t runs = 1;
  std::vector<std::string> faults;
  bool no_monitor = false;
  // bench
  std::size_t n = 100;
  std::string profile;
  std::string export_dir;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const Config& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("AGENTPLAN_SEED")) {
    char* end = nullptr;
    errno = 0;
    const auto v = std::strtoull(env, &end, 10);
    if (errno != 0 || end == env || *end != '\0') throw UsageError("AGENTPLAN_SEED is not an unsigned integer");
    return v;
  }
  return 0;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

ObjectiveSet objectives_of(const Config& c) {
  try {
    return ObjectiveSet::parse(c.objectives);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--objectives: ") + e.what());
  }
}

SelectionPolicy policy_of(const Config& c, const ObjectiveSet& o) {
  SelectionPolicy p;
  try {
    p = c.policy == "balanced" ? SelectionPolicy::balanced(o) : SelectionPolicy::parse(c.policy);
    p.check(o);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--policy: ") + e.what());
  }
  return p;
}

CacheConfig cache_config_of(const Config& c) {
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw UsageError("--tau must be in (0, 1]");
  CacheConfig cc;
  cc.tau = c.tau;
  cc.short_capacity = c.short_capacity;
  cc.long_capacity = c.long_capacity;
  cc.promote_after = c.promote_after;
  cc.ttl = c.ttl;
  return cc;
}

PlannerOptions planner_of(const Config& c) {
  PlannerOptions p;
  p.max_frontier = c.max_frontier;
  p.max_variants = c.max_variants;
  p.hub_edge_latency_ms = c.hub_latency;
  return p;
}

FaultSpec parse_fault(const std::string& text) {
  // engine:factor[@from]
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--fault expects engine:factor[@from_ms], got '" + text + "'");
  FaultSpec f;
  f.engine_id = text.substr(0, colon);
  auto rest = text.substr(colon + 1);
  try {
    const auto at = rest.find('@');
    f.latency_factor = std::stod(rest.substr(0, at));
    if (at != std::string::npos) f.effective_from = std::stod(rest.substr(at + 1));
  } catch (const std::exception&) {
    throw UsageError("--fault: bad number in '" + text + "'");
  }
  return f;
}

struct Inputs {
  Registry registry;
  Pools pools;
};

Inputs load_inputs(const Config& c) {
  require(c.registry, "--registry");
  require(c.models, "--models");
  require(c.engines, "--engines");
  return {io::load_registry(c.registry), io::load_pools(c.models, c.engines)};
}

std::string format_cost(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void print_frontier(std::ostream& out, const ParetoFrontier& f, std::optional<std::size_t> selected) {
  out << std::left << std::setw(5) << "plan" << std::setw(18) << "structure";
  for (auto d : f.objectives.dims()) out << std::setw(16) << dim_name(d);
  out << "hash\n";
  for (std::size_t k = 0; k < f.size(); ++k) {
    const auto& e = f.entries[k];
    out << std::setw(5) << k << std::setw(18) << to_string(e.structure);
    for (auto d : f.objectives.dims()) out << std::setw(16) << format_cost(e.cost.m(d));
    out << to_hex(e.hash) << (selected && *selected == k ? "  *" : "") << "\n";
  }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_validate(const Config& c, std::ostream& out) {
  require(c.registry, "--registry");
  require(c.workflow, "--workflow");
  const auto registry = io::load_registry(c.registry);
  const auto w = io::load_workflow(c.workflow);
  const auto report = validate(w, registry);
  if (!report.ok()) {
    out << "invalid: " << w.name << "\n" << report.to_string() << "\n";
    return 1;
  }
  out << "ok: " << w.name << " (" << w.nodes.size() << " agents, " << to_string(classify_structure(w)) << ")\n";
  if (!c.models.empty() && !c.engines.empty()) {
    const auto pools = io::load_pools(c.models, c.engines);
    const auto variants = rewrite_variants(w, registry, c.max_variants);
    const auto size = space_size(variants, registry, pools);
    if (size.unsatisfiable_agent) {
      out << "unsatisfiable agent: " << *size.unsatisfiable_agent << "\n";
      return 1;
    }
    out << "variants: " << variants.size() << ", plans: " << (size.overflow ? std::string(">2^64") : std::to_string(size.count))
        << "\n";
  }
  return 0;
}

int cmd_optimize(const Config& c, std::ostream& out) {
  require(c.workflow, "--workflow");
  const auto o = objectives_of(c);
  const auto policy = policy_of(c, o);
  const auto in = load_inputs(c);
  const auto w = io::load_workflow(c.workflow);

  const auto frontier = optimize(w, o, {in.registry, in.pools, nullptr}, planner_of(c));
  const auto& chosen = select(frontier, policy);
  std::optional<std::size_t> chosen_index;
  for (std::size_t k = 0; k < frontier.size(); ++k)
    if (frontier.entries[k].hash == chosen.hash) chosen_index = k;

  const fs::path dir = c.out;
  io::write_json(dir / "frontier.json", io::to_json(frontier));
  for (std::size_t k = 0; k < frontier.size(); ++k)
    io::write_text(dir / ("plan-" + std::to_string(k) + ".dot"), io::to_dot(frontier.entries[k].plan));

  print_frontier(out, frontier, chosen_index);
  out << frontier.size() << " plan(s) on the frontier";
  if (frontier.tie_collapsed) out << ", " << frontier.tie_collapsed << " cost-identical plan(s) collapsed";
  if (frontier.truncated) out << ", " << frontier.truncated << " truncated";
  out << "; selected plan " << *chosen_index << " under " << policy.to_string() << "\n";
  out << "wrote " << (dir / "frontier.json").string() << "\n";
  return 0;
}

ExecutableWorkflow plan_for_run(const Config& c, const Inputs& in, const ObjectiveSet& o, const SelectionPolicy& p) {
  if (!c.plan.empty()) {
    const auto j = io::read_json(c.plan);
    if (j.contains("entries")) {
      const auto& entries = j.at("entries");
      if (entries.empty()) throw PlanningFault("frontier file has no plans");
      if (c.index) {
        if (*c.index >= entries.size()) throw UsageError("--index out of range");
        return io::executable_from_json(entries.at(*c.index).at("plan"));
      }
      // Re-cost the stored plans and apply the policy.
      ParetoFrontier f;
      f.objectives = o;
      for (const auto& e : entries) {
        FrontierEntry fe;
        fe.plan = io::executable_from_json(e.at("plan"));
        fe.cost = estimate_workflow(fe.plan, in.registry, in.pools, {nullptr, nullptr, c.hub_latency});
        fe.hash = plan_hash(fe.plan);
        fe.structure = classify_structure(fe.plan.base);
        f.entries.push_back(std::move(fe));
      }
      return select(f, p).plan;
    }
    return io::executable_from_json(j);
  }
  require(c.workflow, "--workflow or --plan");
  const auto w = io::load_workflow(c.workflow);
  const auto frontier = optimize(w, o, {in.registry, in.pools, nullptr}, planner_of(c));
  return select(frontier, p).plan;
}

json cost_json(const CostDistribution& c) { return io::to_json(c)["means"]; }

int cmd_run(const Config& c, std::ostream& out, bool stats_only) {
  const auto o = objectives_of(c);
  const auto policy = policy_of(c, o);
  const auto in = load_inputs(c);
  if (c.runs < 1) throw UsageError("--runs must be >= 1");
  const auto seed = resolve_seed(c);

  std::vector<FaultSpec> faults;
  for (const auto& f : c.faults) faults.push_back(parse_fault(f));
  DeviationRule rule;
  rule.delta = c.delta;
  rule.min_samples = c.min_samples;
  try {
    rule.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--delta/--min-samples: ") + e.what());
  }

  const auto plan = plan_for_run(c, in, o, policy);
  Simulator sim(in.registry, in.pools, {c.edge_latency});
  sim.inject(faults);
  Statistics stats(Statistics::kDefaultAlpha, known_bindings(in.registry, in.pools));
  std::optional<MMCache> cache;
  if (!c.no_cache) cache.emplace(cache_config_of(c));

  SessionConfig sc;
  sc.runs = c.runs;
  sc.seed = seed;
  sc.monitor = !c.no_monitor;
  sc.rule = rule;
  sc.objectives = o;
  sc.policy = policy;
  sc.planner = planner_of(c);
  const auto session = run_session(plan, sim, stats, cache ? &*cache : nullptr, sc);

  const fs::path dir = c.out;
  if (stats_only) {
    const auto s = cache ? cache->stats() : CacheStats{};
    const auto j = io::to_json(s);
    io::write_json(dir / "cache_stats.json", j);
    if (cache) {
      std::ostringstream os;
      cache->export_jsonl(os);
      io::write_text(dir / "cache.jsonl", os.str());
    }
    out << j.dump(2) << "\n";
    out << "entries: " << (cache ? cache->size() : 0) << "\n";
    return 0;
  }

  std::ostringstream tele;
  io::write_jsonl(tele, session.telemetry);
  io::write_text(dir / "telemetry.jsonl", tele.str());

  std::ostringstream trig;
  for (const auto& t : session.triggers)
    trig << json{{"id", t.id},
                 {"run_id", t.run_id},
                 {"agent_id", t.agent_id},
                 {"binding", io::to_json(t.binding)},
                 {"dimension", std::string(dim_name(t.dim))},
                 {"estimate", t.estimate},
                 {"observed", t.observed}}
                .dump()
         << "\n";
  io::write_text(dir / "triggers.jsonl", trig.str());

  json runs = json::array();
  CostDistribution totals;
  for (const auto& r : session.runs) {
    runs.push_back({{"latency_ms", r.latency_ms},
                    {"monetary_usd", r.monetary_usd},
                    {"tokens", r.tokens},
                    {"energy_j", r.energy_j},
                    {"cache_hits", r.cache_hits},
                    {"run_id", r.telemetry.empty() ? std::string() : r.telemetry.front().run_id}});
    totals.m(Dim::Latency) += r.latency_ms;
    totals.m(Dim::Monetary) += r.monetary_usd;
    totals.m(Dim::Tokens) += r.tokens;
    totals.m(Dim::Energy) += r.energy_j;
  }
  json switches = json::array();
  for (const auto& s : session.switches) {
    json changes = json::array();
    for (const auto& ch : s.changes)
      changes.push_back({{"agent_id", ch.agent_id}, {"from", io::to_json(ch.from)}, {"to", io::to_json(ch.to)}});
    switches.push_back({{"run_id", s.run_id},
                        {"after_layer", s.after_layer},
                        {"trigger", s.trigger_id},
                        {"changes", changes},
                        {"estimate_before", cost_json(s.before)},
                        {"estimate_after", cost_json(s.after)}});
  }
  json summary{{"seed", seed},
               {"initial_plan", to_hex(plan_hash(plan))},
               {"final_plan", io::to_json(session.final_plan)},
               {"runs", runs},
               {"totals",
                {{"latency_ms", totals.m(Dim::Latency)},
                 {"monetary_usd", totals.m(Dim::Monetary)},
                 {"tokens", totals.m(Dim::Tokens)},
                 {"energy_j", totals.m(Dim::Energy)}}},
               {"triggers", session.triggers.size()},
               {"switches", switches},
               {"rejected_records", session.rejected}};
  if (cache) summary["cache"] = io::to_json(cache->stats());
  io::write_json(dir / "summary.json", summary);

  out << "runs: " << session.runs.size() << ", records: " << session.telemetry.size()
      << ", triggers: " << session.triggers.size() << ", switches: " << session.switches.size() << "\n";
  out << "total latency_ms " << format_cost(totals.m(Dim::Latency)) << ", monetary_usd "
      << format_cost(totals.m(Dim::Monetary)) << "\n";
  out << "wrote " << (dir / "telemetry.jsonl").string() << "\n";
  return 0;
}

int cmd_bench(const Config& c, std::ostream& out) {
  const auto o = objectives_of(c);
  const auto policy = policy_of(c, o);
  if (c.n < 1) throw UsageError("--n must be >= 1");
  WorkloadProfile profile = WorkloadProfile::defaults();
  if (!c.profile.empty()) profile = WorkloadProfile::from_json(io::read_json(c.profile));
  const auto seed = resolve_seed(c);

  const auto registry = generator_registry();
  const auto pools = (!c.models.empty() && !c.engines.empty()) ? io::load_pools(c.models, c.engines) : generator_pools();
  const auto workflows = generate(c.n, profile, seed);
  if (!c.export_dir.empty())
    for (const auto& w : workflows) io::write_json(fs::path(c.export_dir) / (w.name + ".json"), io::to_json(w));

  BenchOptions opts;
  opts.objectives = o;
  opts.policy = policy;
  opts.seed = seed;
  opts.cache = !c.no_cache;
  opts.cache_config = cache_config_of(c);
  opts.planner = planner_of(c);
  const auto report = bench(workflows, registry, pools, opts);
  io::write_json(fs::path(c.out) / "bench.json", report.to_json());

  std::size_t planned = 0;
  for (const auto& r : report.first.rows)
    if (!r.skipped) ++planned;
  out << "workflows: " << report.workflows << " (" << planned << " optimized)\n";
  out << "first pass: symbolic hit rate " << format_cost(report.first.symbolic_hit_rate())
      << ", deterministic hit rate " << format_cost(report.first.deterministic_hit_rate()) << "\n";
  out << "replay: symbolic hit rate " << format_cost(report.replay.symbolic_hit_rate())
      << ", deterministic hit rate " << format_cost(report.replay.deterministic_hit_rate()) << "\n";
  if (report.baseline) {
    out << "caches transparent: " << (report.transparent ? "yes" : "NO") << "\n";
    out << "simulated latency_ms with cache " << format_cost(report.first.latency_ms) << ", without "
        << format_cost(report.baseline->latency_ms) << "\n";
  }
  out << "wrote " << (fs::path(c.out) / "bench.json").string() << "\n";
  return report.transparent ? 0 : 1;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Config c;
  CLI::App app{"Multi-objective optimizer and simulator for multi-agent workflows", "agentplan"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* s, bool needs_pools) {
    s->add_option("--registry", c.registry, "agent registry JSON");
    s->add_option("--models", c.models, "model pool JSON");
    s->add_option("--engines", c.engines, "engine pool JSON");
    s->add_option("--max-variants", c.max_variants, "structure variants considered")->capture_default_str();
    if (!needs_pools) return;
    s->add_option("--objectives", c.objectives, "comma-separated objectives")->capture_default_str();
    s->add_option("--policy", c.policy,
                  "balanced | weighted:latency=0.5,monetary=0.5 | lexicographic:error,latency | "
                  "constrained:monetary<=2,min=latency")
        ->capture_default_str();
    s->add_option("--seed", c.seed, "random seed (falls back to AGENTPLAN_SEED)");
    s->add_option("--out", c.out, "output directory")->capture_default_str();
    s->add_option("--max-frontier", c.max_frontier, "truncate frontiers to this size (0 = unbounded)");
    s->add_option("--hub-latency", c.hub_latency, "latency per hub dispatch edge (ms)");
    s->add_option("--tau", c.tau, "semantic cache similarity threshold")->capture_default_str();
    s->add_flag("--no-cache", c.no_cache, "disable all caches");
    s->add_option("--short-capacity", c.short_capacity, "short-term tier capacity")->capture_default_str();
    s->add_option("--long-capacity", c.long_capacity, "long-term tier capacity")->capture_default_str();
    s->add_option("--promote-after", c.promote_after, "hits before promotion")->capture_default_str();
    s->add_option("--ttl", c.ttl, "entry lifetime in cache ticks");
  };

  auto* validate_cmd = app.add_subcommand("validate", "check a workflow against the registry");
  common(validate_cmd, false);
  validate_cmd->add_option("--workflow", c.workflow, "abstract workflow JSON");

  auto* optimize_cmd = app.add_subcommand("optimize", "compute the Pareto frontier of executable plans");
  common(optimize_cmd, true);
  optimize_cmd->add_option("--workflow", c.workflow, "abstract workflow JSON");

  auto run_options = [&](CLI::App* s) {
    common(s, true);
    s->add_option("--workflow", c.workflow, "abstract workflow JSON");
    s->add_option("--plan", c.plan, "frontier.json or a single plan JSON");
    s->add_option("--index", c.index, "frontier entry to run");
    s->add_option("--runs", c.runs, "back-to-back runs")->capture_default_str();
    s->add_option("--fault", c.faults, "engine:factor[@from_ms]");
    s->add_option("--delta", c.delta, "re-optimization deviation threshold")->capture_default_str();
    s->add_option("--min-samples", c.min_samples, "observations before a trigger")->capture_default_str();
    s->add_flag("--no-monitor", c.no_monitor, "disable re-optimization");
    s->add_option("--edge-latency", c.edge_latency, "communication latency per consumer (ms)");
  };
  auto* run_cmd = app.add_subcommand("run", "simulate the selected plan with monitoring");
  run_options(run_cmd);
  auto* stats_cmd = app.add_subcommand("cache-stats", "simulate runs and report cache counters");
  run_options(stats_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "generate a workload and compare caches on and off");
  common(bench_cmd, true);
  bench_cmd->add_option("--n", c.n, "workflows to generate")->capture_default_str();
  bench_cmd->add_option("--profile", c.profile, "workload profile JSON");
  bench_cmd->add_option("--export", c.export_dir, "write generated workflows here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate_cmd) return cmd_validate(c, out);
    if (*optimize_cmd) return cmd_optimize(c, out);
    if (*run_cmd) return cmd_run(c, out, false);
    if (*stats_cmd) return cmd_run(c, out, true);
    if (*bench_cmd) return cmd_bench(c, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Fault& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

} // namespace agentplan
