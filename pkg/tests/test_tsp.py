import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_force_path

from compute_routing.tsp import OverlayInstance, UnreachableError, metric_tsp_path


def euclidean(points):
    p = np.asarray(points, dtype=float)
    return np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))


def instance(dist, closed=False):
    n = len(dist)
    nodes = tuple(range(n))
    return OverlayInstance(nodes, dist, 0, 0 if closed else n - 1)


def test_single_required_node():
    inst = OverlayInstance(("s", "z", "t"), np.ones((3, 3)) - np.eye(3), "s", "t")
    assert metric_tsp_path(inst) == ["s", "z", "t"]


def test_closed_tour_with_three_nodes():
    dist = euclidean([(0, 0), (1, 0), (1, 1), (0, 1)])
    order = metric_tsp_path(instance(dist, closed=True))
    assert order[0] == order[-1] == 0
    assert sorted(order[1:-1]) == [1, 2, 3]
    assert instance(dist, closed=True).length(order) == pytest.approx(4.0)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=3, max_size=10))
def test_exact_matches_brute_force(points):
    dist = euclidean(points)
    inst = instance(dist)
    order = metric_tsp_path(inst, "exact")
    best, _ = brute_force_path(dist, 0, len(points) - 1)
    assert inst.length(order) == pytest.approx(best, abs=1e-9)


@pytest.mark.parametrize("method", ["mst", "christofides"])
@given(points=st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=3, max_size=10))
def test_approximations_within_twice_optimum(method, points):
    dist = euclidean(points)
    inst = instance(dist)
    order = metric_tsp_path(inst, method)
    assert order[0] == 0 and order[-1] == len(points) - 1
    assert sorted(order) == list(range(len(points)))
    best, _ = brute_force_path(dist, 0, len(points) - 1)
    assert inst.length(order) <= 2 * best + 1e-9


def test_auto_switches_to_tree_doubling_for_many_nodes():
    rng = np.random.default_rng(1)
    dist = euclidean(rng.uniform(0, 10, size=(16, 2)))
    order = metric_tsp_path(instance(dist))
    assert sorted(order) == list(range(16))


def test_one_way_pairs_still_get_a_finite_order():
    inf = math.inf
    dist = np.array([
        [0, 1, 5, 9],
        [inf, 0, 1, 4],
        [inf, 2, 0, 1],
        [inf, inf, inf, 0],
    ])
    inst = instance(dist)
    for method in ("mst", "christofides", "exact"):
        assert math.isfinite(inst.length(metric_tsp_path(inst, method)))


def test_unreachable_required_node():
    inf = math.inf
    dist = np.array([[0, inf, 1], [inf, 0, inf], [1, inf, 0]])
    with pytest.raises(UnreachableError):
        metric_tsp_path(instance(dist))


def test_bad_inputs():
    with pytest.raises(ValueError):
        OverlayInstance((0, 1), np.zeros((3, 3)), 0, 1)
    with pytest.raises(ValueError):
        OverlayInstance((0, 1), -np.ones((2, 2)), 0, 1)
    with pytest.raises(ValueError):
        metric_tsp_path(instance(np.zeros((3, 3))), "genetic")
