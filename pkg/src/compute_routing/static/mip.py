"""Walk-based mixed-integer formulation for non-splittable flows.

Each demand follows one walk, encoded by integer traversal counts per link,
so the route may revisit nodes to collect processing capacity from several
compute nodes. Unprocessed compute demand is carried along the walk's links
as a separate flow that is drained at the nodes doing the processing.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..lp import INFEASIBLE, LinearProgram, solve_mip
from ..netmodel import Demand, Network
from .common import (
    DelayRows,
    FormulationOptions,
    WalkSolution,
    diagnose_infeasibility,
    evaluate_delay,
)
from .walks import DisconnectedWalkError, extract_walks


def _resources(network: Network, demands: list[Demand]) -> list[str]:
    types = list(network.resource_types)
    for d in demands:
        types.extend(r for r, w in d.compute.items() if w > 0 and r not in types)
    return types


def build_mip_rinp(
    network: Network, demands: list[Demand], options: FormulationOptions
) -> tuple[LinearProgram, dict]:
    """Assemble the walk MIP; returns the model and its variable index maps."""
    big_m = options.big_m or 2 * network.num_links
    lp = LinearProgram("min", "mip-rinp")
    rows = DelayRows(lp, network, options)
    resources = _resources(network, demands)
    idx: dict = {"u": {}, "eps": {}, "y": {}, "w": {}, "k": {}, "rows": rows}
    usage: dict[tuple, dict[int, float]] = {}

    for d in demands:
        scales = d.scale if isinstance(d.scale, tuple) else (d.scale,)
        if options.use_scale and any(f != 1.0 for f in scales):
            raise ValueError(
                f"demand {d.id}: the walk formulation carries no post-processing scaling"
            )
        single = (options.processing or d.processing) == "single-node"
        u = [lp.add_variable(f"u[{d.id},{e.id}]", 0, big_m, integer=True) for e in network.links]
        eps = [lp.add_variable(f"eps[{d.id},{e.id}]", 0, 1, integer=True) for e in network.links]
        idx["u"][d.id], idx["eps"][d.id] = u, eps
        for i in range(network.num_links):
            rows.add(i, u[i], d.volume)
            lp.add_constraint({eps[i]: 1.0, u[i]: -1.0}, "<=", 0.0)
            lp.add_constraint({u[i]: 1.0, eps[i]: -big_m}, "<=", 0.0)
        for v, node in enumerate(network.nodes):
            row = {u[i]: 1.0 for i in network.out_lists[v]}
            for i in network.in_lists[v]:
                row[u[i]] = row.get(u[i], 0.0) - 1.0
            rhs = (node.id == d.source) - (node.id == d.sink)
            lp.add_constraint(row, "==", float(rhs), f"walk[{d.id},{node.id}]")

        for r in resources:
            work = d.work(r)
            if work <= 0:
                continue
            hosts = network.compute_nodes(r)
            y = [
                lp.add_variable(f"y[{d.id},{r},{e.id}]", 0.0, big_m * work)
                for e in network.links
            ]
            idx["y"][d.id, r] = y
            if single:
                k = {z: lp.add_variable(f"k[{d.id},{r},{z}]", 0, 1, integer=True) for z in hosts}
                idx["k"][d.id, r] = k
                w = {z: {k[z]: work} for z in hosts}
                lp.add_constraint({var: 1.0 for var in k.values()}, "==", 1.0)
                for z, var in k.items():
                    if z == d.source:
                        continue
                    v = network.node_index[z]
                    row = {var: 1.0}
                    for i in network.out_lists[v] + network.in_lists[v]:
                        row[eps[i]] = row.get(eps[i], 0.0) - 1.0
                    lp.add_constraint(row, "<=", 0.0)
            else:
                wv = {z: lp.add_variable(f"w[{d.id},{r},{z}]", 0.0, work) for z in hosts}
                idx["w"][d.id, r] = wv
                w = {z: {var: 1.0} for z, var in wv.items()}
            for i in range(network.num_links):
                lp.add_constraint({y[i]: 1.0, eps[i]: -big_m * work}, "<=", 0.0)
            for v, node in enumerate(network.nodes):
                row = {y[i]: 1.0 for i in network.out_lists[v]}
                for i in network.in_lists[v]:
                    row[y[i]] = row.get(y[i], 0.0) - 1.0
                for var, coef in w.get(node.id, {}).items():
                    row[var] = row.get(var, 0.0) + coef
                rhs = work if node.id == d.source else 0.0
                lp.add_constraint(row, "==", rhs, f"work[{d.id},{r},{node.id}]")
            for z, expr in w.items():
                for var, coef in expr.items():
                    usage.setdefault((z, r), {})[var] = coef

    for (z, r), row in usage.items():
        node = network.node(z)
        lp.add_constraint(row, "<=", node.usable(r), f"cap[{z},{r}]")
    rows.finish()
    return lp, idx


def solve_mip_rinp(
    network: Network,
    demands: list[Demand],
    options: FormulationOptions | None = None,
    diagnose: bool = True,
) -> WalkSolution:
    """Optimal single-walk routing with split processing along the walk.

    Set ``options.processing`` (or a demand's ``processing``) to
    ``"single-node"`` to force all of a demand's processing onto one node.
    """
    options = options or FormulationOptions()
    demands = list(demands)
    lp, idx = build_mip_rinp(network, demands, options)
    sol = solve_mip(lp, gap_tol=options.mip_gap, time_limit=options.time_limit)
    if sol.x is None:
        cause = None
        if sol.status == INFEASIBLE and diagnose:
            cause = diagnose_infeasibility(
                network, demands,
                lambda net: solve_mip_rinp(net, demands, options, diagnose=False).ok,
            )
        return WalkSolution(sol.status, cause=cause, message=sol.message)

    x = sol.x
    rows: DelayRows = idx["rows"]
    flows = rows.values(x)
    result = WalkSolution(
        sol.status,
        objective=sol.objective,
        delay=evaluate_delay(network, flows),
        link_flow=flows,
        gap=sol.gap,
        bound=sol.bound,
        message=sol.message,
    )
    for d in demands:
        u = np.rint(x[idx["u"][d.id]]).astype(int)
        result.traversals[d.id] = u
        result.used[d.id] = np.rint(x[idx["eps"][d.id]]).astype(int)
        result.volume[d.id] = d.volume
        result.parent[d.id] = d.id
        result.allocation[d.id] = {}
        result.unprocessed[d.id] = {}
        for (did, r), y in idx["y"].items():
            if did != d.id:
                continue
            result.unprocessed[d.id][r] = np.maximum(x[y], 0.0)
            if (d.id, r) in idx["k"]:
                alloc = {z: d.work(r) * round(x[v]) for z, v in idx["k"][d.id, r].items()}
            else:
                alloc = {z: float(max(x[v], 0.0)) for z, v in idx["w"][d.id, r].items()}
            result.allocation[d.id][r] = {z: w for z, w in alloc.items() if w > 1e-9}
        try:
            result.walks[d.id] = extract_walks(u, network, d.source, d.sink)
        except DisconnectedWalkError:
            # a detached cycle can only appear within the solver tolerance
            result.walks[d.id] = []
    return result


def split_demand(demand: Demand, k: int) -> list[Demand]:
    """``k`` equal subflows, each carrying ``1/k`` of volume and compute."""
    return [
        Demand(
            (demand.id, i),
            demand.source,
            demand.sink,
            demand.volume / k,
            {r: w / k for r, w in demand.compute.items()},
            demand.scale,
            1,
            demand.processing,
        )
        for i in range(k)
    ]


def solve_mip_k(
    network: Network,
    demands: list[Demand],
    k: int,
    options: FormulationOptions | None = None,
) -> WalkSolution:
    """Split each demand into ``k`` equal subflows and route them as independent
    non-splittable flows. Subflow ids are ``(demand_id, i)``; the solution's
    ``parent`` map and :meth:`WalkSolution.demand_traffic` merge them back."""
    if k < 1:
        raise ValueError("k must be at least 1")
    options = options or FormulationOptions()
    if k == 1:
        return solve_mip_rinp(network, demands, options)
    subflows = [s for d in demands for s in split_demand(d, k)]
    if options.big_m is None:
        options = replace(options, big_m=2 * network.num_links)
    result = solve_mip_rinp(network, subflows, options)
    result.parent = {s.id: s.id[0] for s in subflows}
    return result


def mip_size(network: Network, demands: list[Demand]) -> int:
    """Variable count of the walk MIP, for size checks before solving."""
    lp, _ = build_mip_rinp(network, demands, FormulationOptions(use_scale=False))
    return lp.num_variables


def decompose_to_one_stop(
    walk: list, traffic: float, allocations: dict
) -> list[tuple[list, object, float, float]]:
    """Split an n-stop path into n one-stop paths over the same links.

    Args:
        walk: Link sequence of the path.
        traffic: Traffic ``f`` carried by the path.
        allocations: Processing ``w_i`` done at each stop node.

    Returns:
        ``(walk, stop, traffic_i, w_i)`` per stop with ``traffic_i = f * w_i / w``.
    """
    total = math.fsum(allocations.values())
    if not total > 0:
        raise ValueError("total processing allocation must be positive")
    return [
        (list(walk), stop, traffic * w / total, w)
        for stop, w in allocations.items()
        if w > 0
    ]
