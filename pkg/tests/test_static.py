import numpy as np
import pytest
from conftest import demand, value_or_inf
from hypothesis import given
from hypothesis import strategies as st
from oracles import one_stop_lp, walk_oracle

from compute_routing import Demand, Link, Network, Node, pwl_delay
from compute_routing.io import InstanceSpec, gen_random_instance
from compute_routing.static import (
    DisconnectedWalkError,
    FormulationOptions,
    decompose_to_one_stop,
    evaluate_with_scaling,
    extract_walks,
    greedy_alloc_baseline,
    greedy_allocation,
    mip_size,
    solve_mip_k,
    solve_mip_rinp,
    solve_sr_infinite,
    split_demand,
    walk_counts,
    walk_nodes,
)


def small_instance(seed, nodes=(5, 7), compute=(1, 2), demands=(1, 2)):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(nodes[0], nodes[1] + 1))
    links = int(rng.integers(max(8, n), 15))
    spec = InstanceSpec(
        num_nodes=n, num_links=links, num_compute=int(rng.integers(compute[0], compute[1] + 1)),
        num_demands=int(rng.integers(demands[0], demands[1] + 1)), seed=seed, volume=(2.0, 8.0),
    )
    doc = gen_random_instance(spec)
    return doc.network, doc.demands


# ---------------------------------------------------------------- walk MIP


def test_detour_walk_visits_both_compute_nodes(detour_net):
    sol = solve_mip_rinp(detour_net, [Demand("d", "s", "t", 1, {"cpu": 2})])
    assert sol.status == "optimal"
    walk = sol.walks["d"]
    nodes = walk_nodes(detour_net, walk, "s")
    assert nodes == ["s", "a", "m1", "a", "m2", "t"]
    assert nodes.count("a") == 2
    assert sol.allocation["d"]["cpu"] == pytest.approx({"m1": 1.0, "m2": 1.0})
    assert sol.objective == pytest.approx(pwl_delay(detour_net, sol.link_flow))


def test_no_compute_gives_simple_shortest_walk(detour_net):
    sol = solve_mip_rinp(detour_net, [Demand("d", "s", "t", 1)])
    assert sol.walks["d"] == ["sa", "at"]


def test_compute_shortfall_is_diagnosed(detour_net):
    sol = solve_mip_rinp(detour_net, [Demand("d", "s", "t", 1, {"cpu": 3})])
    assert sol.status == "infeasible" and sol.cause == "compute"


def test_single_node_processing_mode(detour_net):
    sol = solve_mip_rinp(detour_net, [Demand("d", "s", "t", 1, {"cpu": 1}, processing="single-node")])
    assert list(sol.allocation["d"]["cpu"].values()) == [1.0]


def test_walk_mip_rejects_scaling(detour_net):
    with pytest.raises(ValueError, match="scaling"):
        solve_mip_rinp(detour_net, [Demand("d", "s", "t", 1, {"cpu": 1}, scale=2.0)])


@pytest.mark.parametrize("seed", range(8))
def test_walk_mip_matches_enumeration(seed):
    net, demands = small_instance(seed, nodes=(5, 5), compute=(2, 2), demands=(1, 1))
    expected, _ = walk_oracle(net, demands)
    sol = solve_mip_rinp(net, demands)
    assert value_or_inf(sol) == pytest.approx(expected, rel=1e-6)
    if not sol.ok:
        return
    assert sol.objective == pytest.approx(expected, rel=1e-6)
    for d in demands:
        assert np.array_equal(walk_counts(net, sol.walks[d.id]), sol.traversals[d.id])


def test_mip_k_one_equals_mip(detour_net):
    d = [Demand("d", "s", "t", 1, {"cpu": 1})]
    assert solve_mip_k(detour_net, d, 1).objective == solve_mip_rinp(detour_net, d).objective


@pytest.mark.parametrize("seed", range(5))
def test_mip_k_nonincreasing(seed):
    net, demands = small_instance(200 + seed, nodes=(5, 6), demands=(1, 1))
    values = [value_or_inf(solve_mip_k(net, demands, k)) for k in (1, 2, 4)]
    assert values[1] <= values[0] + 1e-6 and values[2] <= values[1] + 1e-6


def test_mip_k_large_k_near_split_optimum(detour_net):
    d = [Demand("d", "s", "t", 4, {"cpu": 2})]
    split = solve_sr_infinite(detour_net, d).objective
    fine = solve_mip_k(detour_net, d, 8)
    assert fine.objective <= split * 1.02
    assert set(fine.parent.values()) == {"d"}
    assert fine.demand_traffic("d").sum() == pytest.approx(fine.link_flow.sum())


def test_split_demand_shares():
    parts = split_demand(Demand("d", "s", "t", 3, {"cpu": 6}), 3)
    assert [p.id for p in parts] == [("d", 0), ("d", 1), ("d", 2)]
    assert all(p.volume == 1 and p.work("cpu") == 2 for p in parts)


def test_mip_size_counts_variables(detour_net):
    assert mip_size(detour_net, [Demand("d", "s", "t", 1, {"cpu": 1})]) > 2 * detour_net.num_links


# ---------------------------------------------------------------- walks


def test_extract_simple_path(line_net):
    assert extract_walks([1, 1, 0], line_net, "s", "t") == ["sz", "zt"]


def test_extract_rejects_unbalanced(line_net):
    with pytest.raises(DisconnectedWalkError):
        extract_walks([1, 0, 0], line_net, "s", "t")


def test_extract_rejects_detached_cycle():
    net = Network(list("stab"), [Link("st", "s", "t", 1), Link("ab", "a", "b", 1), Link("ba", "b", "a", 1)])
    with pytest.raises(DisconnectedWalkError):
        extract_walks([1, 1, 1], net, "s", "t")


@given(st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_extract_walk_multiplicities(loops):
    # hub with three self-return loops plus an exit; every loop count is balanced
    nodes = ["s", "h", "t", "x0", "x1", "x2"]
    links = [Link("sh", "s", "h", 9), Link("ht", "h", "t", 9)]
    for i in range(3):
        links += [Link(f"out{i}", "h", f"x{i}", 9), Link(f"in{i}", f"x{i}", "h", 9)]
    net = Network(nodes, links)
    u = [1, 1]
    for c in loops:
        u += [c, c]
    walk = extract_walks(u, net, "s", "t")
    assert walk_counts(net, walk).tolist() == u
    assert walk_nodes(net, walk, "s")[-1] == "t"


# ---------------------------------------------------------------- splittable


def test_ample_single_node_takes_everything(line_net):
    demands = [demand("a", volume=2, work=2), demand("b", volume=1, work=3)]
    sol = solve_sr_infinite(line_net, demands)
    assert sol.shares == {"a": {"z": pytest.approx(2)}, "b": {"z": pytest.approx(1)}}


def test_detour_split_uses_two_one_stop_paths(detour_net):
    sol = solve_sr_infinite(detour_net, [Demand("d", "s", "t", 2, {"cpu": 2}, split_limit=None)])
    assert sol.shares["d"] == pytest.approx({"m1": 1.0, "m2": 1.0})


def test_half_scale_halves_second_segment(detour_net):
    sol = solve_sr_infinite(detour_net, [Demand("d", "s", "t", 2, {"cpu": 2}, scale=0.5)])
    first = sum(v.sum() for k, v in sol.segment_flows.items() if k[1] == 0)
    second = sum(v.sum() for k, v in sol.segment_flows.items() if k[1] == 1)
    for z in ("m1", "m2"):
        into = sol.segment_flows["d", 0, "s", z]
        out = sol.segment_flows["d", 1, z, "t"]
        assert out.sum() * 2 * (len(into.nonzero()[0])) == pytest.approx(into.sum() * len(out.nonzero()[0]))
    assert first > second


def test_scale_one_reproduces_unscaled(detour_net):
    d = [Demand("d", "s", "t", 2, {"cpu": 2}, scale=1.0)]
    assert solve_sr_infinite(detour_net, d).objective == solve_sr_infinite(
        detour_net, d, FormulationOptions(use_scale=False)).objective


def test_scale_aware_beats_scale_ignorant(detour_net):
    d = [Demand("d", "s", "t", 2, {"cpu": 2}, scale=2.0)]
    aware = solve_sr_infinite(detour_net, d)
    blind = solve_sr_infinite(detour_net, d, FormulationOptions(use_scale=False))
    assert aware.objective <= pwl_delay(detour_net, evaluate_with_scaling(detour_net, d, blind)) + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_split_matches_path_lp(seed):
    net, demands = small_instance(300 + seed, nodes=(5, 7), compute=(1, 3), demands=(1, 3))
    sol = solve_sr_infinite(net, demands)
    assert value_or_inf(sol) == pytest.approx(one_stop_lp(net, demands), rel=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_aggregated_equals_flow_based(seed):
    net, demands = small_instance(400 + seed, nodes=(5, 7), demands=(2, 3))
    a = solve_sr_infinite(net, demands)
    b = solve_sr_infinite(net, demands, FormulationOptions(aggregate=True))
    assert a.ok == b.ok
    if not a.ok:
        return
    assert b.objective == pytest.approx(a.objective, rel=1e-6, abs=1e-9)
    assert b.routing_variables <= a.routing_variables


def test_budget_never_worse_than_fixed(detour_net):
    d = [Demand("d", "s", "t", 2, {"cpu": 2})]
    fixed = solve_sr_infinite(detour_net, d)
    prov = solve_sr_infinite(detour_net, d, FormulationOptions(budget=2.0))
    assert prov.objective <= fixed.objective + 1e-9
    assert sum(v["cpu"] for v in prov.provisioned.values()) <= 2.0 + 1e-9


def test_chain_visits_each_resource_in_order():
    nodes = [Node("s"), Node("f", {"fw": 5}), Node("g", {"gpu": 5}), Node("t")]
    links = [Link(f"{a}{b}", a, b, 10) for a, b in
             [("s", "f"), ("f", "g"), ("g", "t"), ("s", "g"), ("f", "t"), ("g", "f")]]
    net = Network(nodes, links)
    d = Demand("d", "s", "t", 1, {"fw": 1, "gpu": 1})
    sol = solve_sr_infinite(net, [d], FormulationOptions(chain=("fw", "gpu")))
    assert sol.ok and sol.resources == ("fw", "gpu")
    assert sol.allocation(d, 0) == pytest.approx({"f": 1.0})
    assert sol.allocation(d, 1) == pytest.approx({"g": 1.0})


def test_split_infeasible_reports_cause(detour_net):
    sol = solve_sr_infinite(detour_net, [Demand("d", "s", "t", 2, {"cpu": 3})])
    assert sol.status == "infeasible" and sol.cause == "compute"
    tight = Network(detour_net.nodes, [Link(e.id, e.src, e.dst, 0.5) for e in detour_net.links])
    sol = solve_sr_infinite(tight, [Demand("d", "s", "t", 2, {"cpu": 1})])
    assert sol.cause == "bandwidth"


# ---------------------------------------------------------------- greedy placement


def test_greedy_one_node_equals_split(line_net):
    d = [demand(volume=2, work=2)]
    assert greedy_alloc_baseline(line_net, d).objective == pytest.approx(solve_sr_infinite(line_net, d).objective)


def test_greedy_largest_flow_to_largest_node():
    net = Network([Node("s"), Node("big", {"cpu": 6}), Node("small", {"cpu": 3}), Node("t")],
                  [Link(f"{a}{b}", a, b, 20) for a, b in
                   [("s", "big"), ("s", "small"), ("big", "t"), ("small", "t")]])
    shares = greedy_allocation(net, [Demand("x", "s", "t", 1, {"cpu": 2}), Demand("y", "s", "t", 1, {"cpu": 5})])
    assert shares["y"] == {"big": 1.0}
    assert shares["x"] == {"small": 1.0}


@pytest.mark.parametrize("seed", range(5))
def test_greedy_not_better_than_split(seed):
    net, demands = small_instance(500 + seed, nodes=(5, 7), compute=(2, 3), demands=(2, 3))
    g = greedy_alloc_baseline(net, demands)
    s = solve_sr_infinite(net, demands)
    if g.ok:
        assert g.objective >= s.objective - 1e-9


# ---------------------------------------------------------------- decomposition


def test_decompose_one_stop_unchanged():
    assert decompose_to_one_stop(["a", "b"], 5.0, {"z": 3.0}) == [(["a", "b"], "z", 5.0, 3.0)]


def test_decompose_two_stop():
    parts = decompose_to_one_stop(["a"], 6.0, {"x": 1.0, "y": 2.0})
    assert [p[2] for p in parts] == [2.0, 4.0]


@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=5), st.floats(0.1, 50))
def test_decompose_preserves_totals(work, traffic):
    alloc = {f"z{i}": w for i, w in enumerate(work)}
    parts = decompose_to_one_stop(["l1", "l2"], traffic, alloc)
    assert sum(p[2] for p in parts) == pytest.approx(traffic)
    assert {p[1]: p[3] for p in parts} == alloc


def test_decompose_rejects_zero_work():
    with pytest.raises(ValueError):
        decompose_to_one_stop(["a"], 1.0, {"z": 0.0})
