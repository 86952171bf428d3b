"""Segment-routing LP for infinitely splittable flows.

A processed flow is replaced by pure-traffic segment commodities: source to
each processing node, processing node to the next stage, and finally to the
sink. The share of a demand sent through a node fixes the compute it uses
there in proportion to its traffic, so the whole problem stays a
multi-commodity flow LP with an envelope delay objective.
"""

from __future__ import annotations

import math
from typing import Hashable, Mapping

import numpy as np

from ..lp import INFEASIBLE, LinearProgram, solve_lp
from ..netmodel import Demand, Network, NodeId
from .common import (
    DelayRows,
    FormulationOptions,
    SplitSolution,
    conservation_rows,
    diagnose_infeasibility,
    evaluate_delay,
    pick_resource,
)


class ChainError(ValueError):
    """The processing chain names a resource type no node provides."""


def _stage_factor(demand: Demand, stage: int, options: FormulationOptions) -> float:
    """Cumulative scale applied to traffic leaving ``stage`` processing stages."""
    if not options.use_scale:
        return 1.0
    return math.prod(demand.stage_scale(i) for i in range(stage))


class _Builder:
    def __init__(self, network: Network, demands: list[Demand], options: FormulationOptions,
                 fixed_shares: Mapping[Hashable, Mapping[NodeId, float]] | None):
        self.network = network
        self.demands = demands
        self.options = options
        self.fixed_shares = fixed_shares
        if options.chain:
            self.chain = tuple(options.chain)
        else:
            self.chain = (pick_resource(network, demands, options.resource),)
        for r in self.chain:
            if not network.compute_nodes(r):
                raise ChainError(f"no node provides resource {r!r}")
        self.hosts = [network.compute_nodes(r) for r in self.chain]
        self.lp = LinearProgram("min", "sr-infinite")
        self.rows = DelayRows(self.lp, network, options)
        self.commodities: list[tuple[tuple, list[int]]] = []
        self.shares: dict = {}
        self.direct: set = set()
        self.routing_variables = 0
        self.capacity_vars: dict[tuple[NodeId, str], int] = {}
        self.usage: dict[tuple[NodeId, str], dict[int, float]] = {}
        self.aggregated: dict[NodeId, list[int]] = {}

    def commodity(self, key: tuple, src: NodeId, dst: NodeId, volume: Mapping[int, float] | float):
        """Flow variables for one segment commodity carrying ``volume``."""
        if src == dst:
            return
        lp, net = self.lp, self.network
        x = [lp.add_variable(f"x[{key},{e.id}]") for e in net.links]
        self.routing_variables += len(x)
        for i in range(net.num_links):
            self.rows.add(i, x[i])
        if isinstance(volume, Mapping):
            rhs = {src: dict(volume), dst: {v: -c for v, c in volume.items()}}
        else:
            rhs = {src: volume, dst: -volume}
        conservation_rows(lp, net, x, rhs, f"cons{key}")
        self.commodities.append((key, x))

    def build(self):
        lp, k = self.lp, len(self.chain)
        final: dict[NodeId, dict] = {}
        for d in self.demands:
            if all(d.work(r) <= 0 for r in self.chain):
                self.direct.add(d.id)
                self.commodity((d.id, "direct"), d.source, d.sink, d.volume)
                continue
            # pair[i][(a, b)]: pre-processing traffic on segment i from a to b
            pair: list[dict[tuple, int]] = []
            starts = [d.source]
            for i in range(k + 1):
                ends = self.hosts[i] if i < k else [d.sink]
                seg = {}
                for a in starts:
                    for b in ends:
                        seg[a, b] = lp.add_variable(f"q[{d.id},{i},{a},{b}]")
                pair.append(seg)
                starts = ends
            lp.add_constraint({v: 1.0 for v in pair[0].values()}, "==", d.volume, f"total[{d.id}]")
            processed: list[dict[NodeId, dict[int, float]]] = []
            for i in range(k):
                stage: dict[NodeId, dict[int, float]] = {}
                for z in self.hosts[i]:
                    inflow = {v: 1.0 for (a, b), v in pair[i].items() if b == z}
                    row = dict(inflow)
                    for (a, b), v in pair[i + 1].items():
                        if a == z:
                            row[v] = row.get(v, 0.0) - 1.0
                    lp.add_constraint(row, "==", 0.0, f"stage[{d.id},{i},{z}]")
                    stage[z] = inflow
                    r = self.chain[i]
                    use = self.usage.setdefault((z, r), {})
                    for v in inflow:
                        use[v] = use.get(v, 0.0) + d.work(r) / d.volume
                processed.append(stage)
            self.shares[d.id] = processed
            if self.fixed_shares is not None and d.id in self.fixed_shares:
                fixed = self.fixed_shares[d.id]
                for z, inflow in processed[0].items():
                    lp.add_constraint(inflow, "==", float(fixed.get(z, 0.0)), f"fix[{d.id},{z}]")
            for i in range(k + 1):
                factor = _stage_factor(d, i, self.options)
                last = i == k
                for (a, b), v in pair[i].items():
                    if last and self.options.aggregate:
                        final.setdefault(b, {}).setdefault(a, {})
                        cell = final[b][a]
                        cell[v] = cell.get(v, 0.0) + factor
                        continue
                    self.commodity((d.id, i, a, b), a, b, {v: factor})

        for dest, by_origin in final.items():
            net = self.network
            eta = [lp.add_variable(f"eta[{dest},{e.id}]") for e in net.links]
            self.routing_variables += len(eta)
            for i in range(net.num_links):
                self.rows.add(i, eta[i])
            rhs: dict[NodeId, dict[int, float]] = {}
            for origin, expr in by_origin.items():
                cell = rhs.setdefault(origin, {})
                sink_cell = rhs.setdefault(dest, {})
                for v, c in expr.items():
                    cell[v] = cell.get(v, 0.0) + c
                    sink_cell[v] = sink_cell.get(v, 0.0) - c
            conservation_rows(lp, net, eta, rhs, f"agg[{dest}]")
            self.aggregated[dest] = eta

        for (z, r), row in self.usage.items():
            node = self.network.node(z)
            budget = self.options.budget_for(r)
            if budget is None:
                lp.add_constraint(row, "<=", node.usable(r), f"cap[{z},{r}]")
            else:
                cap = self.capacity_vars.get((z, r))
                if cap is None:
                    cap = lp.add_variable(f"N[{z},{r}]")
                    self.capacity_vars[z, r] = cap
                full = dict(row)
                full[cap] = -node.rho(r)
                lp.add_constraint(full, "<=", 0.0, f"cap[{z},{r}]")
        for r in set(self.chain):
            budget = self.options.budget_for(r)
            if budget is not None:
                for z in self.network.compute_nodes(r):
                    if (z, r) not in self.capacity_vars:
                        self.capacity_vars[z, r] = lp.add_variable(f"N[{z},{r}]")
                caps = {v: 1.0 for (z, rr), v in self.capacity_vars.items() if rr == r}
                lp.add_constraint(caps, "<=", budget, f"budget[{r}]")
        self.rows.finish()
        return self

    def solution(self, sol) -> SplitSolution:
        x = sol.x
        flows = self.rows.values(x)
        result = SplitSolution(
            sol.status,
            objective=sol.objective,
            delay=evaluate_delay(self.network, flows),
            link_flow=flows,
            resources=self.chain,
            num_variables=self.lp.num_variables,
            num_constraints=self.lp.num_constraints,
            routing_variables=self.routing_variables,
            message=sol.message,
        )
        for d_id, stages in self.shares.items():
            values = []
            for stage in stages:
                vals = {z: float(sum(x[v] for v in inflow)) for z, inflow in stage.items()}
                values.append({z: s for z, s in vals.items() if s > 1e-12})
            result.stage_shares[d_id] = values
            result.shares[d_id] = values[0]
        for key, xs in self.commodities:
            result.segment_flows[key] = np.maximum(x[xs], 0.0)
        for dest, eta in self.aggregated.items():
            result.aggregated[dest] = np.maximum(x[eta], 0.0)
        if self.capacity_vars:
            result.provisioned = {}
            for (z, r), v in self.capacity_vars.items():
                result.provisioned.setdefault(z, {})[r] = float(x[v])
        return result


def build_sr_infinite(network, demands, options=None, fixed_shares=None) -> LinearProgram:
    """The assembled LP, for inspection or export."""
    return _Builder(network, list(demands), options or FormulationOptions(), fixed_shares).build().lp


def solve_sr_infinite(
    network: Network,
    demands: list[Demand],
    options: FormulationOptions | None = None,
    fixed_shares: Mapping[Hashable, Mapping[NodeId, float]] | None = None,
    diagnose: bool = True,
) -> SplitSolution:
    """Optimal splittable routing with proportional processing allocation.

    Args:
        network: Network to route on.
        demands: Demands; those with no compute need go straight to the sink.
        options: Aggregation, scaling, provisioning and chain switches.
        fixed_shares: Freeze ``h_d^z`` (first-stage traffic processed at each
            node) for the listed demands; only the routing is optimized.
        diagnose: On infeasibility, name the binding resource.
    """
    options = options or FormulationOptions()
    demands = list(demands)
    builder = _Builder(network, demands, options, fixed_shares).build()
    sol = solve_lp(builder.lp)
    if not sol.ok:
        cause = None
        if sol.status == INFEASIBLE and diagnose:
            cause = diagnose_infeasibility(
                network, demands,
                lambda net: solve_sr_infinite(net, demands, options, fixed_shares, False).ok,
            )
        return SplitSolution(
            sol.status, cause=cause, message=sol.message, resources=builder.chain,
            num_variables=builder.lp.num_variables,
            num_constraints=builder.lp.num_constraints,
            routing_variables=builder.routing_variables,
        )
    return builder.solution(sol)


def greedy_allocation(
    network: Network, demands: list[Demand], resource: str | None = None
) -> dict[Hashable, dict[NodeId, float]] | None:
    """Largest compute load first onto the node with the most remaining
    capacity; a load that does not fit spills onto the next nodes.

    Returns first-stage traffic shares per demand, or None if the loads do not
    fit into the total capacity.
    """
    r = pick_resource(network, demands, resource)
    remaining = {z: network.node(z).usable(r) for z in network.compute_nodes(r)}
    order = sorted(
        (d for d in demands if d.work(r) > 0),
        key=lambda d: (-d.work(r), demands.index(d)),
    )
    shares: dict[Hashable, dict[NodeId, float]] = {}
    for d in order:
        need = d.work(r)
        placed: dict[NodeId, float] = {}
        nodes = sorted(remaining, key=lambda z: (-remaining[z], network.node_index[z]))
        for z in nodes:
            if need <= 1e-12:
                break
            take = min(need, remaining[z])
            if take <= 0:
                continue
            placed[z] = take
            remaining[z] -= take
            need -= take
        if need > 1e-9 * d.work(r):
            return None
        shares[d.id] = {z: w / d.work(r) * d.volume for z, w in placed.items()}
    return shares


def greedy_alloc_baseline(
    network: Network, demands: list[Demand], options: FormulationOptions | None = None
) -> SplitSolution:
    """Greedy compute placement followed by routing-only optimization.

    Status ``"allocation-infeasible"`` means the network could carry the
    demands but not under the greedy placement.
    """
    options = options or FormulationOptions()
    demands = list(demands)
    if options.chain and len(options.chain) > 1:
        raise ValueError("the greedy baseline handles a single resource type")
    shares = greedy_allocation(network, demands, options.resource)
    if shares is None:
        return SplitSolution("infeasible", cause="compute")
    result = solve_sr_infinite(network, demands, options, fixed_shares=shares, diagnose=False)
    if not result.ok and result.status == INFEASIBLE:
        free = solve_sr_infinite(network, demands, options, diagnose=True)
        if free.ok:
            result.status = "allocation-infeasible"
        else:
            result.cause = free.cause
    return result


def evaluate_with_scaling(
    network: Network, demands: list[Demand], unscaled: SplitSolution, options: FormulationOptions | None = None
) -> np.ndarray:
    """Link loads when a scale-ignorant routing carries truly scaled traffic.

    Post-processing segments of ``unscaled`` (solved with ``use_scale=False``)
    are multiplied by each demand's cumulative scale factor.
    """
    options = options or FormulationOptions()
    by_id = {d.id: d for d in demands}
    if unscaled.aggregated:
        raise ValueError("scale re-evaluation needs per-demand segment flows")
    flows = np.zeros(network.num_links)
    for key, x in unscaled.segment_flows.items():
        d = by_id[key[0]]
        if key[1] == "direct":
            flows += x
        else:
            flows += x * math.prod(d.stage_scale(i) for i in range(key[1]))
    return flows
