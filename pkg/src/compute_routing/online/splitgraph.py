"""Compute capacity expressed as virtual links.

Every compute node ``z`` becomes an inbound copy ``(z, "in")`` and an
outbound copy ``(z, "out")`` joined by two virtual links: a red link that
consumes the node's compute capacity and a green link that only forwards.
Nodes without compute keep their id. A candidate path must cross exactly one
red link when its demand needs processing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import islice
from typing import Hashable

import networkx as nx
import numpy as np

from ..netmodel import DEFAULT_RESOURCE, Demand, Network, NodeId

PHYSICAL, RED, GREEN = "physical", "red", "green"
GREEN_FACTOR = 1e6
DEFAULT_K = 2


@dataclass(frozen=True)
class SplitLink:
    index: int
    src: Hashable
    dst: Hashable
    kind: str
    capacity: float
    origin: Hashable  # physical link id, or compute node id for red/green


@dataclass
class SplitGraph:
    """Transformed network; see :func:`split_compute_nodes`.

    ``ratio`` is the uniform compute-per-traffic ratio, or None when red links
    are kept in resource units and each demand carries its own ratio.
    """

    network: Network
    links: list[SplitLink]
    resource: str
    ratio: float | None
    inbound: dict[NodeId, Hashable] = field(default_factory=dict)
    outbound: dict[NodeId, Hashable] = field(default_factory=dict)
    red: dict[NodeId, int] = field(default_factory=dict)
    green: dict[NodeId, int] = field(default_factory=dict)

    @property
    def nodes(self) -> list[Hashable]:
        out = []
        for v in self.network.node_ids:
            out.extend([self.inbound[v]] if self.inbound[v] == self.outbound[v]
                       else [self.inbound[v], self.outbound[v]])
        return out

    @property
    def capacity(self) -> np.ndarray:
        return np.array([link.capacity for link in self.links])

    @property
    def kinds(self) -> list[str]:
        return [link.kind for link in self.links]

    def original_nodes(self, path: "CandidatePath | list[int]") -> list[NodeId]:
        """Original node sequence of a split-graph path (copies merged)."""
        links = path.links if isinstance(path, CandidatePath) else path
        seq: list[NodeId] = []
        for i in links:
            link = self.links[i]
            if link.kind != PHYSICAL:
                continue
            a, b = self.network.link(link.origin).src, self.network.link(link.origin).dst
            if not seq:
                seq.append(a)
            seq.append(b)
        return seq

    def original_links(self, path: "CandidatePath | list[int]") -> list:
        links = path.links if isinstance(path, CandidatePath) else path
        return [self.links[i].origin for i in links if self.links[i].kind == PHYSICAL]

    def routing_graph(self, allow_red: bool = False) -> nx.DiGraph:
        """Simple digraph over split nodes; parallel links keep the lowest index."""
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for link in self.links:
            if link.kind == RED and not allow_red:
                continue
            if not g.has_edge(link.src, link.dst):
                g.add_edge(link.src, link.dst, index=link.index)
        return g


def split_compute_nodes(
    network: Network,
    ratio: float | None = None,
    resource: str | None = None,
) -> SplitGraph:
    """Build the split graph.

    Args:
        network: Original network.
        ratio: Compute needed per traffic unit. When given, red-link capacity
            is ``N_z / ratio`` in traffic units; when None it stays ``N_z``
            in resource units and each path scales its red link by the
            demand's own ``W_d / h_d``.
        resource: Resource type (defaults to the network's only type).
    """
    if ratio is not None and not ratio > 0:
        raise ValueError("resource ratio must be positive")
    types = network.resource_types
    resource = resource or (types[0] if types else DEFAULT_RESOURCE)
    compute = set(network.compute_nodes(resource))
    g = SplitGraph(network, [], resource, ratio)
    for v in network.node_ids:
        if v in compute:
            g.inbound[v], g.outbound[v] = (v, "in"), (v, "out")
        else:
            g.inbound[v] = g.outbound[v] = v
    green_cap = GREEN_FACTOR * float(network.capacity.max() if network.num_links else 1.0)
    for link in network.links:
        g.links.append(SplitLink(len(g.links), g.outbound[link.src], g.inbound[link.dst],
                                 PHYSICAL, link.capacity, link.id))
    for v in network.node_ids:
        if v not in compute:
            continue
        cap = network.node(v).usable(resource)
        if ratio is not None:
            cap = cap / ratio
        g.red[v] = len(g.links)
        g.links.append(SplitLink(len(g.links), g.inbound[v], g.outbound[v], RED, cap, v))
        g.green[v] = len(g.links)
        g.links.append(SplitLink(len(g.links), g.inbound[v], g.outbound[v], GREEN, green_cap, v))
    return g


@dataclass(frozen=True)
class CandidatePath:
    """A split-graph path with its per-link traffic multipliers.

    ``delta[i]`` multiplies the demand's volume on ``links[i]``: 1 on physical
    and green links, the compute-per-traffic ratio on the red link (1 when the
    red capacity is already in traffic units). ``length`` is the sum of the
    multipliers.
    """

    demand: Hashable
    id: int
    links: tuple[int, ...]
    delta: tuple[float, ...]
    processing: NodeId | None

    @property
    def length(self) -> float:
        return float(sum(self.delta))

    @property
    def hops(self) -> int:
        return len(self.links)

    def coefficients(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for e, c in zip(self.links, self.delta):
            out[e] = out.get(e, 0.0) + c
        return out


def _k_shortest(g: nx.DiGraph, a, b, k: int) -> list[list]:
    if a == b:
        return [[a]]
    try:
        return list(islice(nx.shortest_simple_paths(g, a, b), k))
    except nx.NetworkXNoPath:
        return []


def _edge_indices(g: nx.DiGraph, nodes: list) -> list[int]:
    return [g.edges[a, b]["index"] for a, b in zip(nodes, nodes[1:])]


def generate_candidate_paths(
    graph: SplitGraph, demand: Demand, k: int = DEFAULT_K
) -> list[CandidatePath]:
    """Up to ``k`` times (number of compute nodes) candidate paths.

    For each compute node, up to ``k`` fewest-hop segments into its inbound
    copy are joined with up to ``k`` fewest-hop segments out of its outbound
    copy through the red link; segments avoid red links, so other compute
    nodes are crossed on their green links. Joined paths that repeat a node
    are dropped. The result is ordered by hop count, then length, then the
    link sequence, and numbered in that order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    work = demand.work(graph.resource)
    g = graph.routing_graph()
    src, dst = graph.inbound[demand.source], graph.outbound[demand.sink]
    if work > 0:
        ratio = 1.0 if graph.ratio is not None else work / demand.volume
        found: dict[tuple, tuple] = {}
        compute = list(graph.red)
        for z in compute:
            heads = _k_shortest(g, src, graph.inbound[z], k)
            tails = _k_shortest(g, graph.outbound[z], dst, k)
            red = graph.red[z]
            for head in heads:
                for tail in tails:
                    if len(set(head) | set(tail)) != len(head) + len(tail):
                        continue
                    links = _edge_indices(g, head) + [red] + _edge_indices(g, tail)
                    delta = tuple(ratio if e == red else 1.0 for e in links)
                    found.setdefault(tuple(links), (delta, z))
        cap = k * len(compute)
    else:
        found = {
            tuple(_edge_indices(g, nodes)): (None, None)
            for nodes in _k_shortest(g, src, dst, k)
            if len(nodes) > 1
        }
        found = {links: (tuple(1.0 for _ in links), None) for links in found}
        cap = k
    ordered = sorted(found.items(), key=lambda kv: (len(kv[0]), sum(kv[1][0]), kv[0]))
    return [
        CandidatePath(demand.id, i, links, delta, z)
        for i, (links, (delta, z)) in enumerate(ordered[:cap])
    ]
