"""Fast approximate routing on a live capacity ledger.

All heuristics route demands one at a time. Each link is priced by the
increase in its M/M/1 delay caused by the added traffic, and links that would
leave the delay envelope are skipped. Ties go to the lowest node index, then
the lowest link index, so runs are reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Hashable, Sequence

import numpy as np

from .netmodel import Demand, Network, NodeId, pwl_delay
from .static.common import FormulationOptions, WalkSolution, evaluate_delay, pick_resource
from .static.segment import solve_sr_infinite
from .static.walks import walk_counts
from .tsp import OverlayInstance, UnreachableError, metric_tsp_path

ALLOCATION_TOL = 1e-9
COMPUTE_TOL = 1e-9


def incremental_link_cost(capacity, flow, added, propagation=0.0, u_max: float = 0.98):
    """Delay increase on a link when ``added`` traffic joins ``flow``.

    Returns ``(f+h)/(C-f-h) - f/(C-f) + propagation*h``, or infinity once
    ``f + h`` reaches ``u_max * C``. Works elementwise on arrays.
    """
    if np.any(np.asarray(added) <= 0):
        raise ValueError("added traffic must be positive")
    c = np.asarray(capacity, dtype=float)
    f = np.asarray(flow, dtype=float)
    new = f + added
    blocked = new >= u_max * c
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = new / (c - new) - f / (c - f) + np.asarray(propagation) * added
    cost = np.where(blocked, np.inf, cost)
    return float(cost) if cost.ndim == 0 else cost


class LedgerError(ValueError):
    """A debit would drive remaining capacity negative."""


class CapacityLedger:
    """Remaining bandwidth and compute while demands are placed.

    Every debit is recorded as ``(demand, kind, key, amount)`` with kind
    ``"link"`` (key = link index) or ``"compute"`` (key = (node, resource)).
    """

    def __init__(self, network: Network):
        self.network = network
        self.flow = np.zeros(network.num_links)
        self.compute_used: dict[tuple[NodeId, str], float] = {}
        self.debits: list[tuple[Hashable, str, object, float]] = []

    def remaining_bandwidth(self) -> np.ndarray:
        return self.network.capacity - self.flow

    def remaining_compute(self, node: NodeId, resource: str) -> float:
        used = self.compute_used.get((node, resource), 0.0)
        return self.network.node(node).usable(resource) - used

    def link_costs(self, added: float, u_max: float, include_propagation: bool = True,
                   flow: np.ndarray | None = None) -> np.ndarray:
        prop = self.network.propagation if include_propagation else 0.0
        base = self.flow if flow is None else flow
        return incremental_link_cost(self.network.capacity, base, added, prop, u_max)

    def debit_links(self, demand: Hashable, links: Sequence[int], amount: float):
        new = self.flow.copy()
        for e in links:
            new[e] += amount
        if np.any(new > self.network.capacity * (1 + COMPUTE_TOL)):
            raise LedgerError(f"demand {demand!r} overloads a link")
        self.flow = new
        for e in links:
            self.debits.append((demand, "link", e, amount))

    def debit_compute(self, demand: Hashable, node: NodeId, resource: str, amount: float):
        left = self.remaining_compute(node, resource)
        if amount > left + COMPUTE_TOL * max(1.0, abs(left)):
            raise LedgerError(f"demand {demand!r} overloads node {node!r}")
        key = (node, resource)
        self.compute_used[key] = self.compute_used.get(key, 0.0) + amount
        self.debits.append((demand, "compute", key, amount))

    def replay(self) -> tuple[np.ndarray, dict]:
        """Link and compute usage rebuilt from the debit log."""
        flow = np.zeros(self.network.num_links)
        compute: dict = {}
        for _, kind, key, amount in self.debits:
            if kind == "link":
                flow[key] += amount
            else:
                compute[key] = compute.get(key, 0.0) + amount
        return flow, compute


def shortest_paths(network: Network, costs: np.ndarray, source: NodeId):
    """Dijkstra from ``source``; returns distances and predecessor links.

    Among equal-cost predecessors the lowest link index wins.
    """
    n = network.num_nodes
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=int)
    done = np.zeros(n, dtype=bool)
    s = network.node_index[source]
    dist[s] = 0.0
    heap = [(0.0, s)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for e in network.out_lists[v]:
            c = costs[e]
            if not np.isfinite(c):
                continue
            w = int(network.dst_index[e])
            if done[w]:
                continue
            nd = d + c
            if nd < dist[w] - 1e-15:
                dist[w], pred[w] = nd, e
                heapq.heappush(heap, (nd, w))
            elif nd <= dist[w] + 1e-15 and e < pred[w]:
                pred[w] = e
    return dist, pred


def path_links(network: Network, pred: np.ndarray, source: NodeId, target: NodeId) -> list[int]:
    s, v = network.node_index[source], network.node_index[target]
    links: list[int] = []
    while v != s:
        e = pred[v]
        if e < 0:
            raise UnreachableError(f"{target!r} unreachable from {source!r}")
        links.append(int(e))
        v = int(network.src_index[e])
    return links[::-1]


@dataclass
class RoutedPath:
    """One (merged) subflow: its links, processing node and amounts."""

    demand: Hashable
    links: list
    stop: NodeId | None
    volume: float
    work: float
    count: int = 1


@dataclass
class PathSolution:
    """Result of the path-based heuristics."""

    status: str
    objective: float = float("nan")
    delay: float = float("nan")
    link_flow: np.ndarray | None = None
    paths: dict[Hashable, list[RoutedPath]] = field(default_factory=dict)
    unrouted: list[Hashable] = field(default_factory=list)
    ledger: CapacityLedger | None = None

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")

    def allocation(self, demand_id) -> dict[NodeId, float]:
        out: dict[NodeId, float] = {}
        for p in self.paths.get(demand_id, []):
            out[p.stop] = out.get(p.stop, 0.0) + p.work
        return out


def _finish(result, network: Network, ledger: CapacityLedger, options: FormulationOptions):
    result.link_flow = ledger.flow.copy()
    result.objective = pwl_delay(
        network, ledger.flow, options.delay_model, options.include_propagation
    )
    result.delay = evaluate_delay(network, ledger.flow)
    result.status = "feasible" if not result.unrouted else "partial"
    return result


def _segment_route(network, ledger, volume, hops, options):
    """Route consecutive node pairs one after another on tentative loads."""
    flow = ledger.flow.copy()
    links: list[int] = []
    cost = 0.0
    for a, b in zip(hops, hops[1:]):
        if a == b:
            continue
        costs = ledger.link_costs(volume, options.delay_model.u_max,
                                  options.include_propagation, flow)
        dist, pred = shortest_paths(network, costs, a)
        target = network.node_index[b]
        if not np.isfinite(dist[target]):
            return None, math.inf
        seg = path_links(network, pred, a, b)
        for e in seg:
            flow[e] += volume
        links.extend(seg)
        cost += dist[target]
    return links, cost


def sr_tsp(
    network: Network,
    demands: list[Demand],
    options: FormulationOptions | None = None,
    method: str = "auto",
) -> WalkSolution:
    """Single-walk routing guided by the splittable relaxation.

    Processing amounts per node come from :func:`solve_sr_infinite`; each
    demand (largest volume first) then visits its processing nodes in a short
    overlay order and every overlay hop becomes an underlay shortest path.
    """
    options = options or FormulationOptions()
    demands = list(demands)
    resource = pick_resource(network, demands, options.resource)
    for d in demands:
        scales = d.scale if isinstance(d.scale, tuple) else (d.scale,)
        if any(f != 1.0 for f in scales):
            raise ValueError(f"demand {d.id}: single-walk routing carries no scaling")
    relax = solve_sr_infinite(
        network, demands, replace(options, resource=resource, chain=None, aggregate=False)
    )
    ledger = CapacityLedger(network)
    result = WalkSolution("feasible")
    if not relax.ok:
        result.unrouted = [d.id for d in demands]
        result.cause = relax.cause
        _finish(result, network, ledger, options)
        result.status = relax.status
        return result

    order = sorted(range(len(demands)), key=lambda i: (-demands[i].volume, i))
    for i in order:
        d = demands[i]
        work = d.work(resource)
        alloc = {
            z: w for z, w in relax.allocation(d).items() if w >= ALLOCATION_TOL * work
        } if work > 0 else {}
        stops = sorted(
            (z for z in alloc if z not in (d.source, d.sink)),
            key=network.node_index.get,
        )
        nodes = [d.source, *stops] + ([d.sink] if d.sink != d.source else [])
        costs = ledger.link_costs(d.volume, options.delay_model.u_max, options.include_propagation)
        dist = np.zeros((len(nodes), len(nodes)))
        for a, v in enumerate(nodes):
            row, _ = shortest_paths(network, costs, v)
            dist[a] = [row[network.node_index[w]] for w in nodes]
        np.fill_diagonal(dist, 0.0)
        try:
            visit = metric_tsp_path(OverlayInstance(tuple(nodes), dist, d.source, d.sink), method)
        except UnreachableError:
            result.unrouted.append(d.id)
            continue
        links, _ = _segment_route(network, ledger, d.volume, visit, options)
        if links is None or any(
            w > ledger.remaining_compute(z, resource) + COMPUTE_TOL * max(1.0, w)
            for z, w in alloc.items()
        ):
            result.unrouted.append(d.id)
            continue
        ledger.debit_links(d.id, links, d.volume)
        for z, w in alloc.items():
            ledger.debit_compute(d.id, z, resource, w)
        counts = walk_counts(network, [network.links[e].id for e in links])
        result.traversals[d.id] = counts
        result.used[d.id] = (counts > 0).astype(int)
        result.walks[d.id] = [network.links[e].id for e in links]
        result.allocation[d.id] = {resource: dict(alloc)}
        result.volume[d.id] = d.volume
        result.parent[d.id] = d.id
    result.ledger = ledger
    return _finish(result, network, ledger, options)


def _best_two_segment(network, ledger, volume, work, source, sink, resource, options, nearest):
    """Cheapest ``source -> z -> sink`` over compute nodes with room for ``work``.

    With ``nearest`` the node is chosen by the first segment's cost alone.
    """
    if work <= 0:
        links, cost = _segment_route_from(
            network, ledger, volume, source, sink, options, ledger.flow
        )
        return None if links is None else (cost, None, links)
    u_max = options.delay_model.u_max
    costs = ledger.link_costs(volume, u_max, options.include_propagation)
    dist, pred = shortest_paths(network, costs, source)
    candidates = [
        z for z in sorted(network.compute_nodes(resource), key=network.node_index.get)
        if ledger.remaining_compute(z, resource) >= work - COMPUTE_TOL * max(1.0, work)
        and np.isfinite(dist[network.node_index[z]])
    ]
    if nearest:
        candidates.sort(key=lambda z: (dist[network.node_index[z]], network.node_index[z]))
        candidates = candidates[:1]
    best = None
    for z in candidates:
        first = path_links(network, pred, source, z)
        flow = ledger.flow.copy()
        for e in first:
            flow[e] += volume
        second, cost = _segment_route_from(network, ledger, volume, z, sink, options, flow)
        if second is None:
            continue
        total = dist[network.node_index[z]] + cost
        if best is None or total < best[0] - 1e-12:
            best = (total, z, first + second)
    return best


def _segment_route_from(network, ledger, volume, a, b, options, flow):
    if a == b:
        return [], 0.0
    costs = ledger.link_costs(volume, options.delay_model.u_max, options.include_propagation, flow)
    dist, pred = shortest_paths(network, costs, a)
    if not np.isfinite(dist[network.node_index[b]]):
        return None, math.inf
    return path_links(network, pred, a, b), float(dist[network.node_index[b]])


def _route_subflows(network, subflows, options, resource, nearest) -> PathSolution:
    ledger = CapacityLedger(network)
    result = PathSolution("feasible", ledger=ledger)
    for demand_id, source, sink, volume, work in subflows:
        best = _best_two_segment(
            network, ledger, volume, work, source, sink, resource, options, nearest
        )
        if best is None:
            if demand_id not in result.unrouted:
                result.unrouted.append(demand_id)
            continue
        _, z, links = best
        ledger.debit_links(demand_id, links, volume)
        if work > 0:
            ledger.debit_compute(demand_id, z, resource, work)
        ids = [network.links[e].id for e in links]
        paths = result.paths.setdefault(demand_id, [])
        for p in paths:
            if p.links == ids and p.stop == z:
                p.volume += volume
                p.work += work
                p.count += 1
                break
        else:
            paths.append(RoutedPath(demand_id, ids, z, volume, work))
    return _finish(result, network, ledger, options)


def sr_iteration(
    network: Network,
    demands: list[Demand],
    k: int = 1,
    options: FormulationOptions | None = None,
) -> PathSolution:
    """Split every demand into ``k`` equal subflows and route them largest
    first, each on its cheapest two-segment path through one compute node.

    The second segment is priced with the subflow's own first segment already
    on the links. Subflows of a demand that end up on identical paths are
    reported as one merged path.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    options = options or FormulationOptions()
    demands = list(demands)
    resource = pick_resource(network, demands, options.resource)
    subflows = [
        (d.id, d.source, d.sink, d.volume / k, d.work(resource) / k, i)
        for i, d in enumerate(demands)
        for _ in range(k)
    ]
    subflows.sort(key=lambda s: (-s[3], s[5]))
    return _route_subflows(network, [s[:5] for s in subflows], options, resource, False)


def greedy_nearest_baseline(
    network: Network, demands: list[Demand], options: FormulationOptions | None = None
) -> PathSolution:
    """Each demand in input order goes to the cheapest-to-reach compute node
    that can take all of its processing, then on the cheapest path to its sink."""
    options = options or FormulationOptions()
    demands = list(demands)
    resource = pick_resource(network, demands, options.resource)
    subflows = [(d.id, d.source, d.sink, d.volume, d.work(resource)) for d in demands]
    return _route_subflows(network, subflows, options, resource, True)
