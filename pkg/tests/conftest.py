import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from compute_routing import Demand, Link, Network, Node  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def detour_net():
    """Two unit-capacity compute nodes hanging off a hub; a demand needing
    two units must loop through both."""
    nodes = [Node("s"), Node("a"), Node("m1", {"cpu": 1}), Node("m2", {"cpu": 1}), Node("t")]
    links = [
        Link("sa", "s", "a", 10),
        Link("am1", "a", "m1", 10),
        Link("m1a", "m1", "a", 10),
        Link("am2", "a", "m2", 10),
        Link("m2t", "m2", "t", 10),
        Link("at", "a", "t", 10),
    ]
    return Network(nodes, links, name="detour")


@pytest.fixture
def line_net():
    """s -> z -> t with a bypass s -> t."""
    nodes = [Node("s"), Node("z", {"cpu": 10}), Node("t")]
    links = [Link("sz", "s", "z", 10), Link("zt", "z", "t", 10), Link("st", "s", "t", 10)]
    return Network(nodes, links, name="line")


def demand(id_="d", s="s", t="t", volume=1.0, work=1.0, **kw):
    return Demand(id_, s, t, volume, {"cpu": work} if work is not None else {}, **kw)


def value_or_inf(solution):
    """Objective of a solved model, infinity when it has no solution."""
    return solution.objective if solution.ok else float("inf")
