"""Visit orders for required nodes between a fixed start and end.

The overlay distance matrix may be asymmetric (directed shortest paths). The
exact solver uses it as is; the approximations work on the symmetric metric
``max(d(u, v), d(v, u))`` and the resulting order is then priced with the
directed distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import networkx as nx
import numpy as np

EXACT_LIMIT = 12


class UnreachableError(ValueError):
    """Some required node cannot be reached from another."""


@dataclass(frozen=True)
class OverlayInstance:
    """Required nodes plus endpoints with their pairwise distances.

    ``distance[i][j]`` is the cost of going from ``nodes[i]`` to ``nodes[j]``;
    infinite entries mark unreachable pairs. ``source`` and ``sink`` are
    members of ``nodes`` and may coincide (closed tour).
    """

    nodes: tuple[Hashable, ...]
    distance: np.ndarray
    source: Hashable
    sink: Hashable

    def __post_init__(self):
        dist = np.asarray(self.distance, dtype=float)
        if dist.shape != (len(self.nodes), len(self.nodes)):
            raise ValueError("distance matrix does not match node list")
        if np.any(dist < 0):
            raise ValueError("distances must be nonnegative")
        object.__setattr__(self, "distance", dist)
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @property
    def required(self) -> list[int]:
        ends = {self.nodes.index(self.source), self.nodes.index(self.sink)}
        return [i for i in range(len(self.nodes)) if i not in ends]

    def length(self, order: Sequence[Hashable]) -> float:
        idx = [self.nodes.index(v) for v in order]
        return float(sum(self.distance[a, b] for a, b in zip(idx, idx[1:])))


def _held_karp(dist: np.ndarray, s: int, t: int, req: list[int]) -> list[int]:
    m = len(req)
    if m == 0:
        return [s, t]
    full = (1 << m) - 1
    cost = np.full((1 << m, m), math.inf)
    prev = np.full((1 << m, m), -1, dtype=int)
    for j in range(m):
        cost[1 << j, j] = dist[s, req[j]]
    for mask in range(1, full + 1):
        for j in range(m):
            if not mask >> j & 1 or math.isinf(cost[mask, j]):
                continue
            base = cost[mask, j]
            for k in range(m):
                if mask >> k & 1:
                    continue
                nxt = mask | 1 << k
                c = base + dist[req[j], req[k]]
                if c < cost[nxt, k]:
                    cost[nxt, k] = c
                    prev[nxt, k] = j
    total = cost[full] + dist[req, t]
    last = int(np.argmin(total))
    if math.isinf(total[last]):
        raise UnreachableError("no order reaches every required node")
    order = []
    mask = full
    while last >= 0:
        order.append(req[last])
        last, mask = prev[mask, last], mask & ~(1 << last)
    return [s] + order[::-1] + [t]


def _symmetric(dist: np.ndarray) -> np.ndarray:
    # one-way reachable pairs keep their finite direction
    sym = np.maximum(dist, dist.T)
    return np.where(np.isfinite(sym), sym, np.minimum(dist, dist.T))


def _mst(weights: np.ndarray, nodes: list[int]) -> nx.Graph:
    g = nx.Graph()
    for i, a in enumerate(nodes):
        g.add_node(a)
        for b in nodes[i + 1:]:
            g.add_edge(a, b, weight=weights[a, b])
    return nx.minimum_spanning_tree(g, algorithm="prim")


def _shortcut(walk: list[int], s: int, t: int) -> list[int]:
    order, seen = [], set()
    for v in walk:
        if v not in seen and v != t:
            seen.add(v)
            order.append(v)
    if order[0] != s:
        raise AssertionError("walk must start at the source")
    return order + [t]


def _mst_doubling(dist: np.ndarray, s: int, t: int, req: list[int]) -> list[int]:
    sym = _symmetric(dist)
    nodes = sorted({s, t, *req})
    tree = _mst(sym, nodes)
    if s == t:
        walk = list(nx.dfs_preorder_nodes(tree, s))
        return _shortcut(walk, s, t)
    spine = nx.shortest_path(tree, s, t)
    on_spine = set(spine)
    walk: list[int] = []
    for v in spine:
        branch: list[int] = []
        for nb in sorted(tree.neighbors(v)):
            if nb in on_spine:
                continue
            sub = tree.subgraph(nx.node_connected_component(tree.subgraph(set(tree) - {v}), nb))
            branch.extend(nx.dfs_preorder_nodes(sub, nb))
        walk.extend(branch + [v] if v == t else [v] + branch)
    return _shortcut(walk, s, t)


def _christofides(dist: np.ndarray, s: int, t: int, req: list[int]) -> list[int]:
    sym = _symmetric(dist)
    nodes = sorted({s, t, *req})
    tree = _mst(sym, nodes)
    odd = {v for v in tree if tree.degree(v) % 2 == 1}
    if s != t:
        odd ^= {s, t}
    multi = nx.MultiGraph(tree)
    if odd:
        complete = nx.Graph()
        odd_sorted = sorted(odd)
        for i, a in enumerate(odd_sorted):
            for b in odd_sorted[i + 1:]:
                complete.add_edge(a, b, weight=sym[a, b])
        for a, b in nx.min_weight_matching(complete):
            multi.add_edge(a, b, weight=sym[a, b])
    if s == t:
        walk = [u for u, _ in nx.eulerian_circuit(multi, source=s)]
    else:
        walk = [u for u, _ in nx.eulerian_path(multi, source=s)] + [t]
    return _shortcut(walk, s, t)


def metric_tsp_path(instance: OverlayInstance, method: str = "auto") -> list[Hashable]:
    """Order ``source -> required nodes -> sink`` with small total distance.

    Args:
        instance: Overlay nodes and distances.
        method: ``"exact"`` (Held-Karp dynamic program), ``"mst"`` (tree
            doubling, within twice the optimum on symmetric metrics),
            ``"christofides"`` (tree plus minimum matching), or ``"auto"``:
            exact up to 12 required nodes, tree doubling above.

    Returns:
        Node sequence starting at ``source`` and ending at ``sink``; for a
        closed tour the source appears at both ends.
    """
    dist = instance.distance
    s = instance.nodes.index(instance.source)
    t = instance.nodes.index(instance.sink)
    req = instance.required
    reach = np.isfinite(dist)
    for j in req:
        if not reach[s, j] or not reach[j, t]:
            raise UnreachableError(f"{instance.nodes[j]} is not on any source-sink route")
    if method == "auto":
        method = "exact" if len(req) <= EXACT_LIMIT else "mst"
    if method == "exact":
        order = _held_karp(dist, s, t, req)
    elif method == "mst":
        order = _mst_doubling(dist, s, t, req)
    elif method == "christofides":
        order = _christofides(dist, s, t, req)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.isfinite(instance.length([instance.nodes[i] for i in order])):
        # the symmetric relaxation hid a one-way pair
        if len(req) > EXACT_LIMIT:
            raise UnreachableError("no finite visit order found")
        order = _held_karp(dist, s, t, req)
    return [instance.nodes[i] for i in order]
