"""Builders for the bundled topologies.

The public datasets behind these shapes are not redistributed; each builder
reproduces the published node, link and capacity counts and draws demands
from a fixed seed. ``write_bundled`` regenerates the YAML files in ``data/``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..netmodel import Demand, Link, Network, Node
from .documents import TopologyDocument, dump_topology

ABILENE_EDGES = [
    ("ATLA-M5", "ATLAng"), ("ATLAng", "HSTNng"), ("ATLAng", "IPLSng"), ("ATLAng", "WASHng"),
    ("CHINng", "IPLSng"), ("CHINng", "NYCMng"), ("DNVRng", "KSCYng"), ("DNVRng", "SNVAng"),
    ("DNVRng", "STTLng"), ("HSTNng", "KSCYng"), ("HSTNng", "LOSAng"), ("IPLSng", "KSCYng"),
    ("LOSAng", "SNVAng"), ("NYCMng", "WASHng"), ("SNVAng", "STTLng"),
]

GEANT_EDGES = [
    ("AT", "CH"), ("AT", "DE"), ("AT", "HU"), ("AT", "SI"), ("AT", "SK"), ("BE", "FR"),
    ("BE", "NL"), ("BE", "LU"), ("CH", "FR"), ("CH", "IT"), ("CZ", "DE"), ("CZ", "PL"),
    ("CZ", "SK"), ("DE", "FR"), ("DE", "IT"), ("DE", "NL"), ("DE", "SE"), ("DE", "GR"),
    ("DE", "IL"), ("DE", "NY"), ("ES", "FR"), ("ES", "IT"), ("ES", "PT"), ("FR", "LU"),
    ("FR", "UK"), ("GR", "IT"), ("HR", "HU"), ("HR", "SI"), ("HU", "SK"), ("IE", "UK"),
    ("IL", "IT"), ("NL", "UK"), ("NY", "UK"), ("PL", "SE"), ("PT", "UK"), ("RO", "HU"),
    ("RO", "AT"),
]


def _bidirectional(edges, capacity: float, delay: float = 0.0) -> list[Link]:
    links = []
    for a, b in edges:
        links.append(Link(f"{a}-{b}", a, b, capacity, delay))
        links.append(Link(f"{b}-{a}", b, a, capacity, delay))
    return links


def _sample_demands(rng, pool, count, low, high, prefix="d", ratio=1.0):
    demands, used = [], set()
    while len(demands) < count:
        s, t = rng.choice(len(pool), size=2, replace=False)
        pair = (pool[s], pool[t])
        if pair in used:
            continue
        used.add(pair)
        vol = float(np.round(rng.uniform(low, high)))
        demands.append(Demand(f"{prefix}{len(demands)}", pair[0], pair[1], vol, {"cpu": vol * ratio}))
    return demands


def abilene(seed: int = 7) -> TopologyDocument:
    """12 nodes, 30 directed links at 40,000; compute at SNVAng and IPLSng."""
    rng = np.random.default_rng(seed)
    names = sorted({v for e in ABILENE_EDGES for v in e})
    hosts = {"SNVAng": 30000.0, "IPLSng": 30000.0}
    nodes = [Node(v, {"cpu": hosts[v]} if v in hosts else {}) for v in names]
    network = Network(nodes, _bidirectional(ABILENE_EDGES, 40000.0), name="abilene")
    pool = [v for v in names if v not in hosts]
    demands = _sample_demands(rng, pool, 6, 3000, 8000)
    return TopologyDocument(network, demands, {"name": "abilene", "source": "shape of SNDlib abilene"})


def geant(seed: int = 11) -> TopologyDocument:
    """23 nodes, 74 directed links at 80,000; three compute nodes outside the
    demand endpoints. Base volumes are small so scale sweeps up to 10 stay
    feasible."""
    rng = np.random.default_rng(seed)
    names = sorted({v for e in GEANT_EDGES for v in e})
    hosts = {"CH": 16000.0, "NL": 32000.0, "HU": 8000.0}
    nodes = [Node(v, {"cpu": hosts[v]} if v in hosts else {}) for v in names]
    network = Network(nodes, _bidirectional(GEANT_EDGES, 80000.0), name="geant")
    pool = [v for v in names if v not in hosts]
    demands = _sample_demands(rng, pool, 12, 200, 600)
    return TopologyDocument(network, demands, {"name": "geant", "source": "shape of GEANT 2004"})


def vr_suite(index: int) -> TopologyDocument:
    """Users in stars around a mesh of compute nodes (24 nodes, 56 links).

    Each user hangs off one compute node; compute nodes link to two or three
    neighbours. Flows are unsplittable and some need more compute than one
    node offers, so routes must visit several nodes.
    """
    rng = np.random.default_rng(99 + index)
    hubs = [f"c{i}" for i in range(8)]
    mesh = [(hubs[i], hubs[(i + 1) % 8]) for i in range(8)] + [
        ("c0", "c4"), ("c1", "c5"), ("c2", "c6"), ("c3", "c7"),
    ]
    users = [f"u{i}" for i in range(16)]
    star = [(u, hubs[i % 8]) for i, u in enumerate(users)]
    caps = rng.uniform(8.0, 12.0, size=len(hubs)).round(1)
    nodes = [Node(h, {"cpu": float(c)}) for h, c in zip(hubs, caps)] + [Node(u) for u in users]
    links = _bidirectional(mesh, 25.0, 0.01) + _bidirectional(star, 20.0, 0.005)
    network = Network(nodes, links, name=f"vr-{index}")
    demands = []
    for i in range(8):
        s, t = rng.choice(len(users), size=2, replace=False)
        vol = round(float(rng.uniform(4.0, 9.0)), 1)
        work = round(float(rng.uniform(4.0, 9.0)), 1)
        demands.append(Demand(f"f{i}", users[s], users[t], vol, {"cpu": work}))
    return TopologyDocument(network, demands, {"name": f"vr-{index}", "source": "synthetic VR-style"})


def smart_city(seed: int = 3) -> TopologyDocument:
    """40 nodes: a 6 x 6 street grid with some blocks closed, plus four
    station nodes hanging off single access links. Fourteen intersections
    have compute; eight camera intersections send to the two main stations.
    Capacities follow the online defaults (550 per link, 300 per node)."""
    rng = np.random.default_rng(seed)
    rows = cols = 6
    name = lambda r, c: f"x{r}{c}"
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((name(r, c), name(r, c + 1)))
            if r + 1 < rows:
                edges.append((name(r, c), name(r + 1, c)))
    # close about a quarter of the blocks, keeping the first avenue open
    edges = [e for e in edges if rng.random() > 0.25 or e[0][1] == e[1][1] == "0"]
    edges += [("fire", "x35"), ("police", "x22"), ("fire2", "x14"), ("police2", "x41")]
    ids = [name(r, c) for r in range(rows) for c in range(cols)]
    ids += ["fire", "police", "fire2", "police2"]
    streets = [v for v in ids if v.startswith("x")]
    hosts = set(rng.choice(streets, size=14, replace=False))
    nodes = [Node(v, {"cpu": 300.0} if v in hosts else {}) for v in ids]
    network = Network(nodes, _bidirectional(edges, 550.0), name="smart-city")
    cameras = ["x00", "x05", "x50", "x55", "x03", "x30", "x52", "x25"]
    pairs = [[c, "fire" if i % 2 == 0 else "police"] for i, c in enumerate(cameras)]
    meta = {"name": "smart-city", "source": "synthetic street grid", "pairs": pairs}
    return TopologyDocument(network, [], meta)


BUILDERS = {
    "abilene": abilene,
    "geant": geant,
    "smart-city": smart_city,
    "vr-1": lambda: vr_suite(1),
    "vr-2": lambda: vr_suite(2),
    "vr-3": lambda: vr_suite(3),
    "vr-4": lambda: vr_suite(4),
}


def write_bundled(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for key, build in BUILDERS.items():
        doc = build()
        path = directory / f"{key}.yaml"
        dump_topology(doc.network, path, doc.demands, doc.metadata)
        out.append(path)
    return out
