#!/usr/bin/env python3
"""Independent frontier oracle for the support-triage fixture.

Recomputes node costs from the raw profile files, enumerates every binding of
the chain and of the A4/A5-parallel structure, and prints the non-dominated
(latency, monetary, error) means as JSON. The output is frozen under
tests/golden/ and compared against the C++ planner.
"""

import itertools
import json
import sys
from pathlib import Path

EPS = 1e-9
INFERENCE = {"inference-local", "inference-api"}


def load(root):
    reg = json.loads((root / "registry.json").read_text())
    models = json.loads((root / "models.json").read_text())["models"]
    engines = json.loads((root / "engines.json").read_text())["engines"]
    wf = json.loads((root / "workflows" / "support_triage.json").read_text())
    return reg, models, engines, wf


def candidates(agent, models, engines):
    out = []
    if agent["determinism"] == "deterministic":
        for e in engines:
            if e["engine_class"] not in INFERENCE and agent["capability"] in e["supported_capabilities"]:
                out.append((None, e))
    else:
        for m in models:
            if agent["capability"] not in m["quality"]:
                continue
            want = "inference-local" if m["hosting"] == "local" else "inference-api"
            out.extend((m, e) for e in engines if e["engine_class"] == want)
    return out


def node_cost(agent, wl, model, engine):
    lat = engine["startup_latency"]["mean"] + wl["cardinality"] / engine["unit_rate"]["mean"]
    money = 0.0
    err = 0.0
    if model is not None:
        tokens = wl["tokens_in"] + wl["tokens_out"]
        lat += model["latency_per_token"]["mean"] * tokens
        money = tokens / 1e6 * model["price_per_million_tokens"]
        err = 1.0 - model["quality"][agent["capability"]]
    money += engine["monetary_rate"] * lat / 1000.0
    return lat, money, err


def layers_of(nodes, edges):
    indeg = {n: 0 for n in nodes}
    succ = {n: [] for n in nodes}
    for a, b in edges:
        indeg[b] += 1
        succ[a].append(b)
    layers = []
    ready = sorted(n for n in nodes if indeg[n] == 0)
    while ready:
        layers.append(ready)
        nxt = []
        for n in ready:
            for m in succ[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    nxt.append(m)
        ready = sorted(nxt)
    return layers


def plan_cost(layers, costs):
    lat = sum(max(costs[n][0] for n in layer) for layer in layers)
    money = sum(c[1] for c in costs.values())
    keep = 1.0
    for c in costs.values():
        keep *= 1.0 - c[2]
    return lat, money, 1.0 - keep


def dominates(u, v):
    return all(a <= b + EPS for a, b in zip(u, v)) and any(a < b - EPS for a, b in zip(u, v))


def frontier(points):
    points = sorted(set(points))
    keep = [p for p in points if not any(dominates(q, p) for q in points)]
    out = []
    for p in keep:
        if not any(all(abs(a - b) <= EPS for a, b in zip(p, q)) for q in out):
            out.append(p)
    return out


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    reg, models, engines, wf = load(root)
    agents = {a["agent_id"]: a for a in reg["agents"]}
    nodes = wf["nodes"]
    data_edges = [(e["from"], e["to"]) for e in wf["edges"] if e["kind"] == "data"]
    structures = {
        "chain": layers_of(nodes, data_edges),
        "parallel": layers_of(nodes, [(a, b) for a, b in data_edges if (a, b) != ("A4", "A5")] + [("A3", "A5")]),
    }

    per_node = []
    for n in nodes:
        wl = wf["workloads"][n]
        per_node.append([node_cost(agents[n], wl, m, e) for m, e in candidates(agents[n], models, engines)])

    points = []
    for combo in itertools.product(*per_node):
        costs = dict(zip(nodes, combo))
        for layers in structures.values():
            points.append(plan_cost(layers, costs))

    result = {
        "objectives": ["latency_ms", "monetary_usd", "error"],
        "layers": structures,
        "plans": len(points),
        "frontier": frontier(points),
    }
    json.dump(result, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
