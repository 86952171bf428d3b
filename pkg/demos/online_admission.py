"""Replay one smart-city trace through the admission variants and compare
with the offline optimum over the same candidate paths.

    python demos/online_admission.py [seed]
"""

import sys

import numpy as np

from compute_routing.io import bundled_path, load_topology_document
from compute_routing.online import (
    SAFE,
    SHORTEST,
    VIOLATING,
    ScenarioConfig,
    offline_optimum,
    prepare,
    simulate,
    violation_bound,
)

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
doc = load_topology_document(bundled_path("smart-city"))
scenario = ScenarioConfig(pairs=tuple(tuple(p) for p in doc.metadata["pairs"]), seed=seed)
_, graph, trace = prepare(doc.network, scenario)
print(f"{len(trace)} arrivals over {scenario.horizon:g} minutes, {len(graph.links)} split-graph links")

online = simulate(graph, trace, VIOLATING)
runs = {
    "online": online,
    "online-safe": simulate(graph, trace, SAFE, candidates=online.candidates),
    "shortest-path": simulate(graph, trace, SHORTEST, candidates=online.candidates),
}
offline = offline_optimum(graph, trace, online.candidates)
print(f"offline optimum {offline.value:.0f} ({offline.status})")
for label, m in runs.items():
    peak = m.utilization.max(initial=0.0)
    print(f"  {label:<14} accepted {m.accepted_volume:8.0f}  ratio {m.accepted_volume / offline.value:.3f}  "
          f"rejected {m.rejection_count:3d}  peak utilization {peak:.3f}")

state = online.state
counted = np.flatnonzero(state.counted)
util = state.utilization()
worst = max(
    (util[row].max() / violation_bound(state, e), e)
    for row, e in enumerate(counted) if util[row].max() > 0
)
print(f"largest overload relative to its proven cap: {worst[0]:.3f} on link {graph.links[worst[1]].origin}")
