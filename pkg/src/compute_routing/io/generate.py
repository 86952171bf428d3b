"""Seeded random instances for experiments and oracle tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..netmodel import DEFAULT_RESOURCE, Demand, Link, Network, Node
from .documents import TopologyDocument

MAX_RETRIES = 50


@dataclass(frozen=True)
class InstanceSpec:
    """Shape of a random instance.

    ``density`` is the fraction of ordered node pairs that get a link;
    ``num_links`` overrides it with an exact count. Total compute is at least
    ``(1 + margin)`` times total compute demand.
    """

    num_nodes: int = 8
    density: float = 0.3
    num_compute: int = 2
    num_demands: int = 3
    margin: float = 0.5
    seed: int = 0
    num_links: int | None = None
    capacity: tuple[float, float] = (10.0, 20.0)
    volume: tuple[float, float] = (1.0, 3.0)
    compute_ratio: float = 1.0
    resource: str = DEFAULT_RESOURCE

    def __post_init__(self):
        if self.num_nodes < 2 or self.num_compute < 1 or self.num_demands < 1:
            raise ValueError("node, compute-node and demand counts must be positive")
        if self.num_compute > self.num_nodes:
            raise ValueError("more compute nodes than nodes")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")


def _link_target(spec: InstanceSpec) -> int:
    n = spec.num_nodes
    target = spec.num_links if spec.num_links is not None else round(spec.density * n * (n - 1))
    if target < n:
        raise ValueError(
            f"{target} links cannot make {n} nodes strongly connected; raise density"
        )
    return min(target, n * (n - 1))


def gen_random_instance(spec: InstanceSpec) -> TopologyDocument:
    """Strongly connected digraph with compute nodes and demands.

    A random directed Hamiltonian cycle guarantees strong connectivity; the
    remaining links are drawn uniformly from unused ordered pairs.
    """
    target = _link_target(spec)
    rng = np.random.default_rng(spec.seed)
    n = spec.num_nodes
    ids = [f"n{i}" for i in range(n)]
    for _ in range(MAX_RETRIES):
        order = rng.permutation(n)
        pairs = {(int(order[i]), int(order[(i + 1) % n])) for i in range(n)}
        if n == 2:
            pairs = {(0, 1), (1, 0)}
        free = [(a, b) for a in range(n) for b in range(n) if a != b and (a, b) not in pairs]
        extra = target - len(pairs)
        if extra > 0:
            pick = rng.choice(len(free), size=extra, replace=False)
            pairs |= {free[i] for i in pick}
        lo, hi = spec.capacity
        links = [
            Link(f"{ids[a]}-{ids[b]}", ids[a], ids[b], float(np.round(rng.uniform(lo, hi), 3)))
            for a, b in sorted(pairs)
        ]
        demands = []
        for i in range(spec.num_demands):
            s, t = rng.choice(n, size=2, replace=False)
            vol = float(np.round(rng.uniform(*spec.volume), 3))
            demands.append(Demand(f"d{i}", ids[s], ids[t], vol,
                                  {spec.resource: vol * spec.compute_ratio}))
        total = sum(d.work(spec.resource) for d in demands)
        hosts = sorted(rng.choice(n, size=spec.num_compute, replace=False))
        weights = rng.uniform(1.0, 2.0, size=len(hosts))
        caps = (1 + spec.margin) * total * weights / weights.sum()
        caps = np.ceil(caps * 1000) / 1000
        cap_of = {ids[h]: float(c) for h, c in zip(hosts, caps)}
        nodes = [Node(v, {spec.resource: cap_of[v]} if v in cap_of else {}) for v in ids]
        network = Network(nodes, links, name=f"random-{spec.seed}")
        if all(d.sink in network.reachable(d.source) for d in demands):
            return TopologyDocument(network, demands, {"generator": "random", "seed": spec.seed})
    raise ValueError("could not generate a connected instance")
