"""Network, demand and delay-model types shared by every solver.

A :class:`Network` is a directed graph whose links carry bandwidth capacity
(and an optional propagation delay) and whose nodes may host typed compute
capacity. Nodes and links keep their insertion order; that order is the
tie-break order used by the heuristics and the index order of every flow
vector (``flows[i]`` belongs to ``network.links[i]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

NodeId = Hashable
LinkId = Hashable

DEFAULT_RESOURCE = "cpu"
DEFAULT_BREAKPOINTS = (0.0, 0.5, 0.75, 0.9, 0.95, 0.98)


class NetworkError(ValueError):
    """Raised when a network or demand set violates a structural invariant."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SaturatedLinkError(ValueError):
    """A link carries flow at or above its capacity."""


class OutOfEnvelopeError(ValueError):
    """A link carries flow above the piecewise-linear envelope limit."""


def _number(value) -> float:
    # unvalidated networks may carry junk that validate_network reports later
    try:
        return float(value)
    except (TypeError, ValueError):
        return math.nan


def _frozen(mapping: Mapping | None) -> Mapping:
    return MappingProxyType(dict(mapping or {}))


@dataclass(frozen=True)
class Node:
    """A router, optionally with compute capacity per resource type.

    Attributes:
        id: Node identifier.
        compute: Capacity per resource type (resource units).
        utilization: Target utilization bound per resource type, in (0, 1].
            Types missing here default to 1.0.
    """

    id: NodeId
    compute: Mapping[str, float] = field(default_factory=dict)
    utilization: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "compute", _frozen(self.compute))
        object.__setattr__(self, "utilization", _frozen(self.utilization))

    def capacity(self, resource: str) -> float:
        return float(self.compute.get(resource, 0.0))

    def rho(self, resource: str) -> float:
        return float(self.utilization.get(resource, 1.0))

    def usable(self, resource: str) -> float:
        """Capacity discounted by the utilization bound."""
        return self.rho(resource) * self.capacity(resource)


@dataclass(frozen=True)
class Link:
    id: LinkId
    src: NodeId
    dst: NodeId
    capacity: float
    delay: float = 0.0


@dataclass(frozen=True)
class Demand:
    """A flow that must be processed in the network before reaching its sink.

    ``scale`` is the ratio of post-processing to pre-processing volume. For
    processing chains it may be a tuple with one factor per stage; a scalar is
    applied at every stage.
    """

    id: Hashable
    source: NodeId
    sink: NodeId
    volume: float
    compute: Mapping[str, float] = field(default_factory=dict)
    scale: float | tuple[float, ...] = 1.0
    split_limit: int | None = 1
    processing: str = "splittable"

    def __post_init__(self):
        object.__setattr__(self, "compute", _frozen(self.compute))
        if self.processing not in ("splittable", "single-node"):
            raise ValueError(f"unknown processing mode {self.processing!r}")

    def work(self, resource: str) -> float:
        return float(self.compute.get(resource, 0.0))

    @property
    def total_work(self) -> float:
        return float(sum(self.compute.values()))

    def stage_scale(self, stage: int) -> float:
        if isinstance(self.scale, tuple):
            return float(self.scale[stage])
        return float(self.scale)

    def scaled(self, factor: float) -> "Demand":
        """Copy with volume and every compute demand multiplied by ``factor``."""
        return Demand(
            self.id,
            self.source,
            self.sink,
            self.volume * factor,
            {r: w * factor for r, w in self.compute.items()},
            self.scale,
            self.split_limit,
            self.processing,
        )


@dataclass(frozen=True)
class DynamicDemand:
    """A demand that is active during ``[start, start + duration)``."""

    demand: Demand
    start: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    @property
    def id(self):
        return self.demand.id

    @property
    def finish(self) -> float:
        return self.start + self.duration

    def active_slots(self, slot_length: float = 1.0) -> range:
        """Slots ``t`` whose interval ``[t*L, (t+1)*L)`` overlaps the activity."""
        first = math.floor(self.start / slot_length)
        last = math.ceil(self.finish / slot_length)
        return range(first, max(last, first + 1))


@dataclass(frozen=True)
class DelayModel:
    """Congestion delay model: exact M/M/1 or a max-of-tangents envelope.

    The envelope is built from tangents of ``u / (1 - u)`` at each breakpoint
    utilization, so it under-approximates the convex curve and touches it at
    the breakpoints. Flows above ``u_max`` of capacity are outside the envelope.
    """

    kind: str = "piecewise-linear"
    breakpoints: tuple[float, ...] = DEFAULT_BREAKPOINTS

    def __post_init__(self):
        if self.kind not in ("mm1", "piecewise-linear"):
            raise ValueError(f"unknown delay model {self.kind!r}")
        bp = tuple(float(b) for b in self.breakpoints)
        if not bp or bp[0] < 0 or bp[-1] >= 1:
            raise ValueError("breakpoints must lie in [0, 1)")
        if any(b >= a for a, b in zip(bp[1:], bp[:-1])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def u_max(self) -> float:
        return self.breakpoints[-1]

    def tangents(self) -> tuple[np.ndarray, np.ndarray]:
        """Slopes and intercepts of the tangents in utilization units.

        Tangent ``i`` evaluates to ``slope[i] * (f / C) + intercept[i]``.
        """
        u = np.asarray(self.breakpoints)
        slope = 1.0 / (1.0 - u) ** 2
        intercept = -((u / (1.0 - u)) ** 2)
        return slope, intercept

    def envelope(self, utilization) -> np.ndarray:
        slope, intercept = self.tangents()
        u = np.asarray(utilization, dtype=float)
        return np.max(np.multiply.outer(u, slope) + intercept, axis=-1)

    def max_gap(self) -> float:
        """Largest per-link gap between M/M/1 and the envelope on ``[0, u_max]``.

        Between consecutive breakpoints the gap peaks where the two tangents
        cross.
        """
        slope, intercept = self.tangents()
        gap = 0.0
        for i in range(len(slope) - 1):
            u = (intercept[i + 1] - intercept[i]) / (slope[i] - slope[i + 1])
            gap = max(gap, u / (1 - u) - (slope[i] * u + intercept[i]))
        return float(gap)


class Network:
    """Immutable directed network with link bandwidth and node compute.

    Args:
        nodes: Node records, or bare ids for nodes without compute.
        links: Link records.
        name: Free-form label.
        validate: Raise :class:`NetworkError` on structural problems. Pass
            ``False`` to build a network that :func:`validate_network` can
            then inspect.
    """

    def __init__(
        self,
        nodes: Iterable[Node | NodeId],
        links: Iterable[Link],
        name: str = "",
        validate: bool = True,
    ):
        self.nodes: tuple[Node, ...] = tuple(
            n if isinstance(n, Node) else Node(n) for n in nodes
        )
        self.links: tuple[Link, ...] = tuple(links)
        self.name = name
        if validate:
            errors = _structural_errors(self)
            if errors:
                raise NetworkError(errors)
        self.node_index = {n.id: i for i, n in enumerate(self.nodes)}
        self.link_index = {e.id: i for i, e in enumerate(self.links)}
        self._node_by_id = {n.id: n for n in self.nodes}
        self.capacity = np.array([_number(e.capacity) for e in self.links], dtype=float)
        self.propagation = np.array([_number(e.delay) for e in self.links], dtype=float)
        self.capacity.setflags(write=False)
        self.propagation.setflags(write=False)
        self.src_index = np.array(
            [self.node_index.get(e.src, -1) for e in self.links], dtype=int
        )
        self.dst_index = np.array(
            [self.node_index.get(e.dst, -1) for e in self.links], dtype=int
        )
        self.out_lists: list[list[int]] = [[] for _ in self.nodes]
        self.in_lists: list[list[int]] = [[] for _ in self.nodes]
        for i, (a, b) in enumerate(zip(self.src_index, self.dst_index)):
            if a >= 0:
                self.out_lists[a].append(i)
            if b >= 0:
                self.in_lists[b].append(i)

    def __repr__(self):
        return f"Network({self.name!r}, {self.num_nodes} nodes, {self.num_links} links)"

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_links(self) -> int:
        return len(self.links)

    @property
    def node_ids(self) -> list[NodeId]:
        return [n.id for n in self.nodes]

    def node(self, node_id: NodeId) -> Node:
        return self._node_by_id[node_id]

    def link(self, link_id: LinkId) -> Link:
        return self.links[self.link_index[link_id]]

    @property
    def resource_types(self) -> list[str]:
        seen: dict[str, None] = {}
        for n in self.nodes:
            for r, cap in n.compute.items():
                if cap > 0:
                    seen.setdefault(r)
        return list(seen)

    def compute_nodes(self, resource: str | None = None) -> list[NodeId]:
        """Nodes with positive capacity of ``resource`` (of any type if None)."""
        if resource is None:
            return [n.id for n in self.nodes if any(c > 0 for c in n.compute.values())]
        return [n.id for n in self.nodes if n.capacity(resource) > 0]

    def out_incidence(self) -> np.ndarray:
        """``a[v, e] = 1`` if link ``e`` originates at node ``v``."""
        a = np.zeros((self.num_nodes, self.num_links))
        a[self.src_index, np.arange(self.num_links)] = 1.0
        return a

    def in_incidence(self) -> np.ndarray:
        """``b[v, e] = 1`` if link ``e`` terminates at node ``v``."""
        b = np.zeros((self.num_nodes, self.num_links))
        b[self.dst_index, np.arange(self.num_links)] = 1.0
        return b

    def out_links(self, node_id: NodeId) -> list[int]:
        return list(self.out_lists[self.node_index[node_id]])

    def flow_vector(self, flows: Mapping[LinkId, float] | Sequence[float]) -> np.ndarray:
        """Normalize a link-id mapping or a sequence to an indexed flow vector."""
        if isinstance(flows, Mapping):
            vec = np.zeros(self.num_links)
            for lid, f in flows.items():
                vec[self.link_index[lid]] = f
            return vec
        vec = np.asarray(flows, dtype=float)
        if vec.shape != (self.num_links,):
            raise ValueError(f"expected {self.num_links} link flows, got {vec.shape}")
        return vec

    def reachable(self, source: NodeId, usable: np.ndarray | None = None) -> set[NodeId]:
        """Nodes reachable from ``source`` over links flagged in ``usable``."""
        adj: dict[int, list[int]] = {}
        for i in range(self.num_links):
            if usable is None or usable[i]:
                adj.setdefault(int(self.src_index[i]), []).append(int(self.dst_index[i]))
        start = self.node_index[source]
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return {self.nodes[i].id for i in seen}

    def replace(
        self,
        *,
        compute: Mapping[NodeId, Mapping[str, float]] | None = None,
        drop_links: Iterable[LinkId] = (),
        name: str | None = None,
    ) -> "Network":
        """Copy with some node compute capacities replaced and links removed."""
        compute = compute or {}
        drop = set(drop_links)
        nodes = [
            Node(n.id, compute[n.id], n.utilization) if n.id in compute else n
            for n in self.nodes
        ]
        links = [e for e in self.links if e.id not in drop]
        return Network(nodes, links, self.name if name is None else name)


def _structural_errors(network: Network) -> list[str]:
    errors = []
    node_ids = [n.id for n in network.nodes]
    if len(set(node_ids)) != len(node_ids):
        dup = sorted({str(i) for i in node_ids if node_ids.count(i) > 1})
        errors.append(f"duplicate node ids: {', '.join(dup)}")
    link_ids = [e.id for e in network.links]
    if len(set(link_ids)) != len(link_ids):
        dup = sorted({str(i) for i in link_ids if link_ids.count(i) > 1})
        errors.append(f"duplicate link ids: {', '.join(dup)}")
    known = set(node_ids)
    for n in network.nodes:
        for r, cap in n.compute.items():
            if not (isinstance(cap, (int, float)) and cap >= 0 and math.isfinite(cap)):
                errors.append(f"node {n.id}: compute capacity for {r!r} must be >= 0")
        for r, rho in n.utilization.items():
            if not (isinstance(rho, (int, float)) and 0 < rho <= 1):
                errors.append(f"node {n.id}: utilization bound for {r!r} must be in (0, 1]")
    for e in network.links:
        if e.src not in known or e.dst not in known:
            errors.append(f"link {e.id}: unknown endpoint {e.src}->{e.dst}")
        if e.src == e.dst:
            errors.append(f"link {e.id}: self-loop at {e.src}")
        if not (isinstance(e.capacity, (int, float)) and e.capacity > 0):
            errors.append(f"link {e.id}: capacity must be > 0 (got {e.capacity})")
        if not (isinstance(e.delay, (int, float)) and e.delay >= 0):
            errors.append(f"link {e.id}: propagation delay must be >= 0")
    return errors


def _demand_errors(network: Network, demand: Demand) -> list[str]:
    errors = []
    for end in (demand.source, demand.sink):
        if end not in network.node_index:
            errors.append(f"demand {demand.id}: unknown node {end}")
    if demand.source == demand.sink:
        errors.append(f"demand {demand.id}: source equals sink")
    if not (isinstance(demand.volume, (int, float)) and demand.volume > 0):
        errors.append(f"demand {demand.id}: volume must be > 0")
    for r, w in demand.compute.items():
        if not (isinstance(w, (int, float)) and w >= 0):
            errors.append(f"demand {demand.id}: compute demand for {r!r} must be >= 0")
    scales = demand.scale if isinstance(demand.scale, tuple) else (demand.scale,)
    if any(not s > 0 for s in scales):
        errors.append(f"demand {demand.id}: scale factor must be > 0")
    if demand.split_limit is not None and demand.split_limit < 1:
        errors.append(f"demand {demand.id}: split limit must be a positive integer")
    return errors


@dataclass
class Diagnostics:
    """Outcome of :func:`validate_network`.

    ``errors`` are structural problems; ``infeasible`` lists reasons no routing
    can exist. ``multi_stop`` names demands whose compute need exceeds every
    single node, so any feasible route must process at several nodes.
    """

    errors: list[str] = field(default_factory=list)
    infeasible: list[str] = field(default_factory=list)
    unreachable: list[Hashable] = field(default_factory=list)
    compute_balance: dict[str, tuple[float, float]] = field(default_factory=dict)
    zero_capacity_links: list[LinkId] = field(default_factory=list)
    multi_stop: list[Hashable] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and not self.infeasible


def validate_network(network: Network, demands: Iterable[Demand] = ()) -> Diagnostics:
    """Report structural errors and obvious infeasibilities; never raises."""
    diag = Diagnostics()
    demands = list(demands)
    try:
        diag.errors.extend(_structural_errors(network))
        diag.zero_capacity_links = [
            e.id for e in network.links
            if isinstance(e.capacity, (int, float)) and e.capacity <= 0
        ]
        for d in demands:
            diag.errors.extend(_demand_errors(network, d))
        if diag.errors:
            return diag
        usable = network.capacity > 0
        for d in demands:
            if d.sink not in network.reachable(d.source, usable):
                diag.unreachable.append(d.id)
                diag.infeasible.append(
                    f"demand {d.id}: sink {d.sink} unreachable from {d.source}"
                )
        types = set(network.resource_types)
        for d in demands:
            types.update(r for r, w in d.compute.items() if w > 0)
        for r in sorted(types):
            supply = sum(n.usable(r) for n in network.nodes)
            need = sum(d.work(r) for d in demands)
            diag.compute_balance[r] = (supply, need)
            if need > supply * (1 + 1e-12):
                diag.infeasible.append(
                    f"resource {r!r}: total demand {need:g} exceeds usable capacity {supply:g}"
                )
        for d in demands:
            for r, w in d.compute.items():
                best = max((n.usable(r) for n in network.nodes), default=0.0)
                if w > best:
                    diag.multi_stop.append(d.id)
                    break
    except Exception as exc:  # malformed input must still produce diagnostics
        diag.errors.append(f"malformed input: {exc!r}")
    return diag


def mm1_delay(network: Network, flows, include_propagation: bool = True) -> float:
    """Total M/M/1 delay ``sum f/(C-f)`` plus propagation delay times flow."""
    f = network.flow_vector(flows)
    cap = network.capacity
    if np.any(f >= cap):
        bad = [network.links[i].id for i in np.flatnonzero(f >= cap)]
        raise SaturatedLinkError(f"links at or above capacity: {bad}")
    total = float(np.sum(f / (cap - f)))
    if include_propagation:
        total += float(network.propagation @ f)
    return total


def pwl_delay(
    network: Network,
    flows,
    model: DelayModel | None = None,
    include_propagation: bool = True,
) -> float:
    """Piecewise-linear (max-of-tangents) delay summed over links."""
    model = model or DelayModel()
    f = network.flow_vector(flows)
    util = f / network.capacity
    if np.any(util > model.u_max * (1 + 1e-9)):
        bad = [network.links[i].id for i in np.flatnonzero(util > model.u_max * (1 + 1e-9))]
        raise OutOfEnvelopeError(f"links above {model.u_max:g} utilization: {bad}")
    total = float(np.sum(model.envelope(util))) if len(f) else 0.0
    if include_propagation:
        total += float(network.propagation @ f)
    return total


def link_delay(network: Network, flows, model: DelayModel | None = None) -> float:
    """Delay under ``model``; dispatches to the exact or envelope evaluation."""
    if model is not None and model.kind == "mm1":
        return mm1_delay(network, flows)
    return pwl_delay(network, flows, model)


def flow_conservation_residual(network: Network, flows) -> np.ndarray:
    """Per-node outgoing minus incoming flow of a single commodity."""
    x = network.flow_vector(flows)
    out = np.zeros(network.num_nodes)
    np.add.at(out, network.src_index, x)
    np.add.at(out, network.dst_index, -x)
    return out
