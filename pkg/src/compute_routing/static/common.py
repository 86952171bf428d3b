"""Pieces shared by the static formulations: options, results, delay rows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np

from ..lp import LinearProgram
from ..netmodel import (
    DelayModel,
    Demand,
    Network,
    NodeId,
    mm1_delay,
    validate_network,
)

INFEASIBLE_BANDWIDTH = "bandwidth"
INFEASIBLE_COMPUTE = "compute"
INFEASIBLE_CONNECTIVITY = "connectivity"


@dataclass(frozen=True)
class FormulationOptions:
    """Switches shared by the static formulations.

    Attributes:
        delay_model: Piecewise-linear envelope used in every objective.
        aggregate: Route post-processing traffic with per-destination
            variables instead of per-(demand, node) commodities.
        use_scale: Apply each demand's post-processing scale factor. When
            False every factor is treated as 1.
        budget: Total compute budget. When set, node capacities become
            decision variables summing to at most the budget (a mapping gives
            one budget per resource type).
        chain: Ordered resource types every demand must visit.
        resource: Resource type for the single-stage formulations; defaults
            to the network's only type.
        processing: Override each demand's processing mode.
        include_propagation: Add propagation delay times flow to the objective.
        big_m: Traversal cap for the walk formulation (defaults to 2|E|).
        mip_gap: Relative optimality gap for branch and bound.
        time_limit: Wall-clock budget per MIP solve, in seconds.
    """

    delay_model: DelayModel = field(default_factory=DelayModel)
    aggregate: bool = False
    use_scale: bool = True
    budget: float | Mapping[str, float] | None = None
    chain: tuple[str, ...] | None = None
    resource: str | None = None
    processing: str | None = None
    include_propagation: bool = False
    big_m: int | None = None
    mip_gap: float = 1e-6
    time_limit: float | None = None

    def __post_init__(self):
        if self.delay_model.kind != "piecewise-linear":
            raise ValueError("static formulations need a piecewise-linear delay model")
        if self.budget is not None:
            values = self.budget.values() if isinstance(self.budget, Mapping) else [self.budget]
            if any(not b > 0 for b in values):
                raise ValueError("provisioning budget must be positive")
        if self.chain is not None:
            object.__setattr__(self, "chain", tuple(self.chain))

    def budget_for(self, resource: str) -> float | None:
        if self.budget is None:
            return None
        if isinstance(self.budget, Mapping):
            return self.budget.get(resource)
        return float(self.budget)


def pick_resource(network: Network, demands: Iterable[Demand], resource: str | None) -> str:
    if resource is not None:
        return resource
    types = list(network.resource_types)
    for d in demands:
        for r, w in d.compute.items():
            if w > 0 and r not in types:
                types.append(r)
    if len(types) > 1:
        raise ValueError(f"several resource types {types}; pass options.resource or a chain")
    return types[0] if types else "cpu"


class DelayRows:
    """Adds per-link flow and envelope-delay variables to a model.

    ``flow[e]`` equals the sum of the registered contributions and is capped
    at ``u_max * C_e``; ``delay[e]`` sits above every tangent of the envelope.
    Call :meth:`finish` once all contributions are registered.
    """

    def __init__(self, lp: LinearProgram, network: Network, options: FormulationOptions):
        self.lp = lp
        self.network = network
        self.options = options
        model = options.delay_model
        self.terms: list[dict[int, float]] = [dict() for _ in network.links]
        self.constant = np.zeros(network.num_links)
        self.flow = [
            lp.add_variable(f"f[{e.id}]", 0.0, model.u_max * e.capacity) for e in network.links
        ]
        self.delay = [lp.add_variable(f"t[{e.id}]", 0.0) for e in network.links]

    def add(self, link: int, var: int, coef: float = 1.0):
        self.terms[link][var] = self.terms[link].get(var, 0.0) + coef

    def finish(self):
        lp, net = self.lp, self.network
        slope, intercept = self.options.delay_model.tangents()
        for i, e in enumerate(net.links):
            row = {self.flow[i]: 1.0}
            for var, coef in self.terms[i].items():
                row[var] = row.get(var, 0.0) - coef
            lp.add_constraint(row, "==", self.constant[i], f"flow[{e.id}]")
            for k, (s, b) in enumerate(zip(slope, intercept)):
                lp.add_constraint(
                    {self.delay[i]: 1.0, self.flow[i]: -s / e.capacity}, ">=", b,
                    f"tangent[{e.id},{k}]",
                )
            lp.set_cost(self.delay[i], 1.0)
            if self.options.include_propagation and e.delay:
                lp.set_cost(self.flow[i], e.delay)

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x[self.flow], 0.0)


def conservation_rows(
    lp: LinearProgram,
    network: Network,
    flow_vars: list[int],
    rhs: Mapping[NodeId, Mapping[int, float] | float],
    name: str,
):
    """Add ``out - in = rhs[v]`` rows for one commodity.

    ``rhs[v]`` is a constant or a linear expression ``{var: coef}`` moved to
    the left-hand side; nodes missing from ``rhs`` get zero.
    """
    for v, node in enumerate(network.nodes):
        row: dict[int, float] = {}
        for i in network.out_lists[v]:
            row[flow_vars[i]] = row.get(flow_vars[i], 0.0) + 1.0
        for i in network.in_lists[v]:
            row[flow_vars[i]] = row.get(flow_vars[i], 0.0) - 1.0
        value = rhs.get(node.id, 0.0)
        const = 0.0
        if isinstance(value, Mapping):
            for var, coef in value.items():
                row[var] = row.get(var, 0.0) - coef
        else:
            const = float(value)
        lp.add_constraint(row, "==", const, f"{name}[{node.id}]")


def diagnose_infeasibility(network: Network, demands: list[Demand], resolve) -> str:
    """Name the cause of infeasibility by relaxing one resource at a time.

    ``resolve(network)`` must rebuild and solve the model and return whether
    it is feasible.
    """
    diag = validate_network(network, demands)
    if diag.unreachable:
        return INFEASIBLE_CONNECTIVITY
    if any(msg.startswith("resource") for msg in diag.infeasible):
        return INFEASIBLE_COMPUTE
    wide = Network(
        network.nodes,
        [type(e)(e.id, e.src, e.dst, e.capacity * 1e6, e.delay) for e in network.links],
        network.name,
    )
    if resolve(wide):
        return INFEASIBLE_BANDWIDTH
    return INFEASIBLE_COMPUTE


@dataclass
class WalkSolution:
    """Single-walk routing of every (sub)demand.

    Per-(sub)demand arrays are indexed like ``network.links``. ``parent`` maps
    each routed (sub)demand id to the original demand id.
    """

    status: str
    objective: float = float("nan")
    delay: float = float("nan")
    link_flow: np.ndarray | None = None
    traversals: dict[Hashable, np.ndarray] = field(default_factory=dict)
    used: dict[Hashable, np.ndarray] = field(default_factory=dict)
    unprocessed: dict[Hashable, dict[str, np.ndarray]] = field(default_factory=dict)
    allocation: dict[Hashable, dict[str, dict[NodeId, float]]] = field(default_factory=dict)
    walks: dict[Hashable, list] = field(default_factory=dict)
    volume: dict[Hashable, float] = field(default_factory=dict)
    parent: dict[Hashable, Hashable] = field(default_factory=dict)
    unrouted: list[Hashable] = field(default_factory=list)
    cause: str | None = None
    gap: float | None = None
    bound: float | None = None
    message: str = ""
    ledger: object | None = None

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")

    def demand_traffic(self, demand_id) -> np.ndarray:
        """Per-link traffic of an original demand, summed over its subflows."""
        total = None
        for sub, par in self.parent.items():
            if par == demand_id and sub in self.traversals:
                x = self.traversals[sub] * self.volume[sub]
                total = x if total is None else total + x
        return total

    def node_allocation(self, demand_id, resource: str) -> dict[NodeId, float]:
        merged: dict[NodeId, float] = {}
        for sub, par in self.parent.items():
            if par == demand_id:
                for z, w in self.allocation.get(sub, {}).get(resource, {}).items():
                    merged[z] = merged.get(z, 0.0) + w
        return merged


@dataclass
class SplitSolution:
    """Segment-routed (splittable) solution.

    ``shares[d][z]`` is the pre-processing traffic of demand ``d`` processed
    at node ``z`` (first stage). ``stage_shares[d][i][z]`` generalizes it to
    processing chains. ``segment_flows`` maps ``(d, stage, src, dst)`` to the
    per-link traffic of that segment commodity; with aggregation the last
    stage lives in ``aggregated[v]`` keyed by destination.
    """

    status: str
    objective: float = float("nan")
    delay: float = float("nan")
    link_flow: np.ndarray | None = None
    shares: dict[Hashable, dict[NodeId, float]] = field(default_factory=dict)
    stage_shares: dict[Hashable, list[dict[NodeId, float]]] = field(default_factory=dict)
    segment_flows: dict[tuple, np.ndarray] = field(default_factory=dict)
    aggregated: dict[NodeId, np.ndarray] = field(default_factory=dict)
    provisioned: dict[NodeId, dict[str, float]] | None = None
    resources: tuple[str, ...] = ()
    num_variables: int = 0
    num_constraints: int = 0
    routing_variables: int = 0
    cause: str | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")

    def allocation(self, demand: Demand, stage: int = 0) -> dict[NodeId, float]:
        """Compute placed on each node: ``(h_d^z / h_d) * W_d`` for the stage."""
        resource = self.resources[stage]
        shares = self.stage_shares.get(demand.id, [{}])[stage]
        return {z: s / demand.volume * demand.work(resource) for z, s in shares.items()}


def evaluate_delay(network: Network, flows: np.ndarray) -> float:
    """Exact M/M/1 delay, or infinity when a link is saturated."""
    try:
        return mm1_delay(network, flows)
    except ValueError:
        return float("inf")
