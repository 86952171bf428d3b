"""Solve one bundled VR instance with every static mode and print the delays.

    python demos/static_compare.py [vr-1|vr-2|vr-3|vr-4]
"""

import sys

from compute_routing.heuristics import greedy_nearest_baseline, sr_iteration, sr_tsp
from compute_routing.io import bundled_path, load_topology_document
from compute_routing.static import solve_mip_k, solve_mip_rinp, solve_sr_infinite

name = sys.argv[1] if len(sys.argv) > 1 else "vr-1"
doc = load_topology_document(bundled_path(name))
net, demands = doc.network, doc.demands
print(f"{name}: {net.num_nodes} nodes, {net.num_links} links, {len(demands)} flows")

runs = {
    "sr-infinite (lower bound)": solve_sr_infinite(net, demands),
    "mip-k k=2": solve_mip_k(net, demands, 2),
    "mip (single walk)": solve_mip_rinp(net, demands),
    "sr-tsp": sr_tsp(net, demands),
    "sr-iteration k=1": sr_iteration(net, demands, 1),
    "sr-iteration k=9": sr_iteration(net, demands, 9),
    "greedy-nearest": greedy_nearest_baseline(net, demands),
}
exact = runs["mip (single walk)"].delay
for label, sol in runs.items():
    gap = (sol.delay - exact) / exact
    print(f"  {label:<28}{sol.status:<10} objective {sol.objective:9.4f}  delay {sol.delay:9.4f}  "
          f"vs mip {100 * gap:+6.2f}%")
