"""Synthetic dynamic demand traces and their line-record file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable

import numpy as np

from ..netmodel import DEFAULT_RESOURCE, Demand, DynamicDemand, Network

TRACE_VERSION = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of a dynamic-demand experiment.

    Times are in minutes. ``pairs`` lists (source, sink) pairs that arrivals
    cycle through; ``num_pairs`` pairs are drawn from the network when it is
    empty. ``link_capacity`` and ``node_capacity`` override the network's
    values when set.
    """

    arrival_rate: float = 2.0
    duration_mu: float = 0.974
    duration_sigma: float = 0.5
    size_mean: float = 85.0
    size_std: float = 10.0
    horizon: float = 60.0
    slot_length: float = 1.0
    resource_ratio: float = 1.0
    pairs: tuple[tuple[Hashable, Hashable], ...] = ()
    num_pairs: int = 8
    link_capacity: float | None = 550.0
    node_capacity: float | None = 300.0
    k: int = 2
    seed: int = 0
    resource: str = DEFAULT_RESOURCE
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("arrival_rate", "size_mean", "horizon", "slot_length", "resource_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.duration_sigma < 0 or self.size_std < 0:
            raise ValueError("standard deviations must be nonnegative")
        if self.k < 1 or self.num_pairs < 1:
            raise ValueError("k and num_pairs must be at least 1")
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))

    @property
    def mean_duration(self) -> float:
        return math.exp(self.duration_mu + self.duration_sigma**2 / 2)


def apply_capacities(network: Network, scenario: ScenarioConfig) -> Network:
    """Network with the scenario's uniform link and node capacities."""
    if scenario.link_capacity is None and scenario.node_capacity is None:
        return network
    from ..netmodel import Link, Node

    nodes = [
        Node(n.id, {r: scenario.node_capacity for r in n.compute}, n.utilization)
        if scenario.node_capacity is not None and n.compute else n
        for n in network.nodes
    ]
    links = [
        Link(e.id, e.src, e.dst, scenario.link_capacity, e.delay)
        if scenario.link_capacity is not None else e
        for e in network.links
    ]
    return Network(nodes, links, name=network.name)


def pick_pairs(network: Network, count: int, seed: int) -> list[tuple[Hashable, Hashable]]:
    """Distinct connected (source, sink) pairs drawn uniformly."""
    rng = np.random.default_rng(seed)
    ids = network.node_ids
    candidates = [(a, b) for a in ids for b in ids if a != b and b in network.reachable(a)]
    if len(candidates) < count:
        raise ValueError("not enough connected node pairs")
    chosen = rng.choice(len(candidates), size=count, replace=False)
    return [candidates[i] for i in sorted(chosen)]


def generate_trace(scenario: ScenarioConfig, network: Network | None = None) -> list[DynamicDemand]:
    """Poisson arrivals on ``[0, horizon)``, round-robin over the pairs.

    Durations are lognormal ``exp(mu + sigma * Z)``; sizes are Gaussian and
    raised to 1 when they fall below it.
    """
    pairs = list(scenario.pairs)
    if not pairs:
        if network is None:
            raise ValueError("scenario has no pairs and no network to draw them from")
        pairs = pick_pairs(network, scenario.num_pairs, scenario.seed)
    rng = np.random.default_rng(scenario.seed)
    trace: list[DynamicDemand] = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / scenario.arrival_rate)
        if t >= scenario.horizon:
            break
        duration = float(np.exp(scenario.duration_mu + scenario.duration_sigma * rng.standard_normal()))
        size = max(1.0, float(rng.normal(scenario.size_mean, scenario.size_std)))
        s, d = pairs[len(trace) % len(pairs)]
        demand = Demand(len(trace), s, d, size, {scenario.resource: scenario.resource_ratio * size})
        trace.append(DynamicDemand(demand, float(t), duration))
    return trace


def write_trace(trace: list[DynamicDemand], path: str | Path) -> None:
    """One JSON object per line: id, pair, arrival, duration, size, compute."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps({"trace_version": TRACE_VERSION}) + "\n")
        for dd in trace:
            d = dd.demand
            fh.write(json.dumps({
                "id": d.id,
                "source": d.source,
                "sink": d.sink,
                "arrival": dd.start,
                "duration": dd.duration,
                "size": d.volume,
                "compute": dict(d.compute),
            }) + "\n")


def read_trace(path: str | Path) -> list[DynamicDemand]:
    path = Path(path)
    trace = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc.msg}") from None
            if "trace_version" in rec:
                if rec["trace_version"] != TRACE_VERSION:
                    raise ValueError(f"{path}:{lineno}: unsupported trace version")
                continue
            try:
                demand = Demand(rec["id"], rec["source"], rec["sink"], float(rec["size"]),
                                {k: float(v) for k, v in rec.get("compute", {}).items()})
                trace.append(DynamicDemand(demand, float(rec["arrival"]), float(rec["duration"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad trace record ({exc})") from None
    return trace
