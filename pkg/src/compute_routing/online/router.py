"""Primal-dual admission of dynamic demands over candidate paths.

Time is cut into slots of fixed length; a demand occupies every slot its
activity overlaps and its duration ``tau_d`` is counted in slots. Each
(link, slot) pair carries a dual price ``x`` that only grows. A demand is
admitted on the first candidate whose priced length over its slots stays
below ``tau_d``; the violation-free variant additionally requires every
physical and red link on the path to have room in every slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Sequence

import numpy as np

from ..lp import LinearProgram, solve_mip
from ..netmodel import DynamicDemand, Network
from .splitgraph import (
    GREEN,
    CandidatePath,
    SplitGraph,
    generate_candidate_paths,
    split_compute_nodes,
)
from .trace import ScenarioConfig, apply_capacities, generate_trace

VIOLATING, SAFE, SHORTEST = "violating", "safe", "shortest-path"
VARIANTS = (VIOLATING, SAFE, SHORTEST)
CAPACITY_TOL = 1e-9


class DualState:
    """Dual prices and per-slot loads of one run.

    ``x[e, t]`` is the price of split link ``e`` in slot ``t``; ``load[e, t]``
    is the accepted traffic (in the link's capacity units) in that slot.
    Both arrays grow along the slot axis on demand.
    """

    def __init__(self, graph: SplitGraph, slot_length: float = 1.0, horizon_slots: int = 0):
        if not slot_length > 0:
            raise ValueError("slot length must be positive")
        self.graph = graph
        self.slot_length = slot_length
        self.capacity = graph.capacity
        n = len(graph.links)
        self.x = np.zeros((n, horizon_slots))
        self.load = np.zeros((n, horizon_slots))
        self.z: dict[Hashable, float] = {}
        self.accepted: dict[Hashable, CandidatePath] = {}
        self.demand_sets: dict[int, list[Hashable]] = {}
        self.path_sets: dict[int, list[tuple[DynamicDemand, CandidatePath]]] = {}
        self.counted = np.array([k != GREEN for k in graph.kinds])

    @property
    def num_slots(self) -> int:
        return self.x.shape[1]

    def ensure(self, last_slot: int):
        if last_slot >= self.num_slots:
            extra = last_slot + 1 - self.num_slots
            self.x = np.pad(self.x, ((0, 0), (0, extra)))
            self.load = np.pad(self.load, ((0, 0), (0, extra)))

    def slots(self, demand: DynamicDemand) -> range:
        slots = demand.active_slots(self.slot_length)
        self.ensure(slots[-1])
        return slots

    def priced_length(self, demand: DynamicDemand, path: CandidatePath) -> float:
        """``sum_{e,t} x_et * delta_ep`` over the demand's active slots."""
        s = self.slots(demand)
        coef = path.coefficients()
        idx = list(coef)
        return float(np.dot(self.x[idx, s.start:s.stop].sum(axis=1), [coef[e] for e in idx]))

    def fits(self, demand: DynamicDemand, path: CandidatePath) -> bool:
        s = self.slots(demand)
        h = demand.demand.volume
        for e, c in path.coefficients().items():
            if not self.counted[e]:
                continue
            limit = self.capacity[e] * (1 + CAPACITY_TOL)
            if np.any(self.load[e, s.start:s.stop] + h * c > limit):
                return False
        return True

    def utilization(self) -> np.ndarray:
        """Per-slot load over capacity for physical and red links."""
        return self.load[self.counted] / self.capacity[self.counted, None]


@dataclass
class Decision:
    accepted: bool
    path: CandidatePath | None = None
    dual_increase: float = 0.0
    tau: int = 0


def admit(
    demand: DynamicDemand,
    state: DualState,
    candidates: Sequence[CandidatePath],
    variant: str = VIOLATING,
) -> Decision:
    """Admit ``demand`` on the first qualifying candidate or reject it.

    ``variant`` is ``"violating"`` (dual condition only), ``"safe"`` (dual
    condition and capacity) or ``"shortest-path"`` (first candidate only,
    capacity only; the state's prices are still maintained for reporting).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    slots = state.slots(demand)
    tau = len(slots)
    if variant == SHORTEST:
        first = candidates[0] if candidates else None
        chosen = first if first is not None and state.fits(demand, first) else None
    else:
        chosen = None
        for p in candidates:
            if state.priced_length(demand, p) >= tau:
                continue
            if variant == SAFE and not state.fits(demand, p):
                continue
            chosen = p
            break
    if chosen is None:
        return Decision(False, tau=tau)

    h = demand.demand.volume
    before = dual_objective(state)
    state.z[demand.id] = tau * h
    state.accepted[demand.id] = chosen
    length = chosen.length
    sl = slice(slots.start, slots.stop)
    for e, c in chosen.coefficients().items():
        step = h * c / state.capacity[e]
        state.x[e, sl] = state.x[e, sl] * (1 + step) + step / length
        state.load[e, sl] += h * c
        state.demand_sets.setdefault(e, []).append(demand.id)
        state.path_sets.setdefault(e, []).append((demand, chosen))
    return Decision(True, chosen, dual_objective(state) - before, tau)


def dual_objective(state: DualState) -> float:
    """``sum_d z_d + sum_{e,t} C_e x_et``."""
    return float(sum(state.z.values()) + np.sum(state.capacity[:, None] * state.x))


def dual_feasibility_gap(
    state: DualState, trace: Iterable[DynamicDemand], candidates: dict
) -> float:
    """Smallest slack ``z_d + h sum x delta - tau h`` over all demands and paths.

    Nonnegative when the prices form a feasible dual solution.
    """
    worst = math.inf
    for dd in trace:
        tau = len(state.slots(dd))
        h = dd.demand.volume
        z = state.z.get(dd.id, 0.0)
        for p in candidates[dd.id]:
            worst = min(worst, z + h * state.priced_length(dd, p) - tau * h)
    return worst


def _weight(alpha: float, capacity: float) -> float:
    if alpha <= 1.0:
        return 1.0
    return 1.0 / (capacity * ((1 + alpha / capacity) ** (1 / alpha) - 1))


def violation_bound(state: DualState, link: int) -> float:
    """Guaranteed cap on ``load / capacity`` of ``link`` in any slot.

    Evaluates ``W_e log(Delta_e (2 gamma_e + 1) + 1)`` over the paths
    accepted on the link, with ``gamma_e = max tau/delta``, ``alpha_e =
    max h*delta`` and ``Delta_e = max path length``. The weight ``W_e`` is 1
    when ``alpha_e <= 1``; otherwise it is the smallest weight making the
    exponential comparison hold for every accepted path.
    """
    paths = state.path_sets.get(link, [])
    if not paths:
        return 0.0
    gamma = alpha = big_delta = 0.0
    for dd, p in paths:
        c = p.coefficients()[link]
        gamma = max(gamma, len(dd.active_slots(state.slot_length)) / c)
        alpha = max(alpha, dd.demand.volume * c)
        big_delta = max(big_delta, p.length)
    weight = _weight(alpha, state.capacity[link])
    return weight * math.log(big_delta * (2 * gamma + 1) + 1)


@dataclass
class OnlineMetrics:
    """Outcome of one simulated run."""

    variant: str
    accepted_volume: float = 0.0
    accepted: list[Hashable] = field(default_factory=list)
    rejected: list[Hashable] = field(default_factory=list)
    utilization: np.ndarray | None = None
    dual_trace: list[float] = field(default_factory=list)
    dual_steps: list[tuple[Hashable, float, float]] = field(default_factory=list)
    violations: list[tuple[int, int, float]] = field(default_factory=list)
    state: DualState | None = None
    trace: list[DynamicDemand] = field(default_factory=list)
    candidates: dict[Hashable, list[CandidatePath]] = field(default_factory=dict)

    @property
    def rejection_count(self) -> int:
        return len(self.rejected)


def prepare(network: Network, scenario: ScenarioConfig, trace=None):
    """Network with scenario capacities, its split graph, and the trace."""
    net = apply_capacities(network, scenario)
    graph = split_compute_nodes(net, resource=scenario.resource)
    if trace is None:
        trace = generate_trace(scenario, net)
    return net, graph, list(trace)


def candidate_sets(graph: SplitGraph, trace: Iterable[DynamicDemand], k: int = 2) -> dict:
    """Candidate paths per demand, computed once per (pair, ratio)."""
    cache: dict[tuple, list[CandidatePath]] = {}
    out = {}
    for dd in trace:
        d = dd.demand
        work = d.work(graph.resource)
        key = (d.source, d.sink, work / d.volume if work > 0 else 0.0)
        if key not in cache:
            cache[key] = generate_candidate_paths(graph, d, k)
        out[dd.id] = [replace(p, demand=dd.id) for p in cache[key]]
    return out


def simulate(
    graph: SplitGraph,
    trace: Sequence[DynamicDemand],
    variant: str = VIOLATING,
    slot_length: float = 1.0,
    k: int = 2,
    candidates: dict | None = None,
) -> OnlineMetrics:
    """Process ``trace`` in arrival order on ``graph``."""
    order = sorted(trace, key=lambda dd: (dd.start, str(dd.id)))
    horizon = max((dd.active_slots(slot_length)[-1] + 1 for dd in order), default=0)
    state = DualState(graph, slot_length, horizon)
    metrics = OnlineMetrics(variant, state=state, trace=list(order))
    if candidates is None:
        candidates = candidate_sets(graph, order, k)
    metrics.candidates = candidates
    for dd in order:
        decision = admit(dd, state, candidates[dd.id], variant)
        if decision.accepted:
            volume = decision.tau * dd.demand.volume
            metrics.accepted.append(dd.id)
            metrics.accepted_volume += volume
            metrics.dual_steps.append((dd.id, decision.dual_increase, volume))
        else:
            metrics.rejected.append(dd.id)
        metrics.dual_trace.append(dual_objective(state))
    metrics.utilization = state.utilization()
    counted = np.flatnonzero(state.counted)
    for row, t in zip(*np.nonzero(metrics.utilization > 1 + CAPACITY_TOL)):
        metrics.violations.append((int(counted[row]), int(t), float(metrics.utilization[row, t])))
    return metrics


def run_simulation(
    network: Network,
    scenario: ScenarioConfig,
    variant: str = VIOLATING,
    trace: Sequence[DynamicDemand] | None = None,
) -> OnlineMetrics:
    """Generate (or take) a trace and run one admission variant on it."""
    _, graph, trace = prepare(network, scenario, trace)
    return simulate(graph, trace, variant, scenario.slot_length, scenario.k)


@dataclass
class OfflineResult:
    """Packing optimum over fixed candidate sets.

    ``value`` is the best admission found; ``bound`` is a proven upper bound
    (equal to ``value`` when solved to optimality).
    """

    value: float
    bound: float
    status: str
    chosen: dict[Hashable, int] = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def build_offline_model(
    graph: SplitGraph,
    trace: Sequence[DynamicDemand],
    candidates: dict,
    slot_length: float = 1.0,
) -> tuple[LinearProgram, dict]:
    lp = LinearProgram("max", "offline-admission")
    var: dict[tuple, int] = {}
    rows: dict[tuple[int, int], dict[int, float]] = {}
    cap = graph.capacity
    for dd in trace:
        slots = dd.active_slots(slot_length)
        tau, h = len(slots), dd.demand.volume
        ids = []
        for p in candidates[dd.id]:
            v = lp.add_variable(f"y[{dd.id},{p.id}]", 0, 1, integer=True, cost=tau * h)
            var[dd.id, p.id] = v
            ids.append(v)
            for e, c in p.coefficients().items():
                for t in slots:
                    rows.setdefault((e, t), {})[v] = h * c
        if ids:
            lp.add_constraint({v: 1.0 for v in ids}, "<=", 1.0, f"one[{dd.id}]")
    for (e, t), row in sorted(rows.items()):
        if sum(row.values()) > cap[e]:
            lp.add_constraint(row, "<=", float(cap[e]), f"cap[{e},{t}]")
    return lp, var


def offline_optimum(
    graph: SplitGraph,
    trace: Sequence[DynamicDemand],
    candidates: dict,
    slot_length: float = 1.0,
    time_limit: float | None = None,
    gap_tol: float = 1e-6,
) -> OfflineResult:
    """Maximum accepted volume when the whole trace is known in advance.

    Capacity rows that cannot bind are omitted. On a time limit the best
    admission and the solver's upper bound are returned.
    """
    lp, var = build_offline_model(graph, trace, candidates, slot_length)
    if lp.num_variables == 0:
        return OfflineResult(0.0, 0.0, "optimal")
    sol = solve_mip(lp, gap_tol=gap_tol, time_limit=time_limit)
    if sol.x is None:
        raise RuntimeError(f"offline model failed: {sol.status} {sol.message}")
    chosen = {d: p for (d, p), v in var.items() if sol.x[v] > 0.5}
    value = float(sol.objective)
    bound = float(sol.bound) if sol.bound is not None else value
    return OfflineResult(value, max(bound, value), sol.status, chosen)
