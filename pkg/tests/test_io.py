import csv
import json

import numpy as np
import pytest

from compute_routing import validate_network
from compute_routing.io import (
    DocumentError,
    ExperimentPlan,
    InstanceSpec,
    bundled_path,
    dump_topology,
    gen_random_instance,
    load_demands,
    load_plan,
    load_topology,
    load_topology_document,
)
from compute_routing.io.fixtures import BUILDERS
from compute_routing.io.runner import emit_results, gap_table, load_results, run_experiment
from compute_routing.online import ScenarioConfig

TINY = """
schema_version: 1
name: tiny
nodes:
  - {id: s}
  - {id: z, compute: {cpu: 10}}
  - {id: t}
links:
  - {id: sz, src: s, dst: z, capacity: 10}
  - {id: zt, src: z, dst: t, capacity: 10}
  - {id: st, src: s, dst: t, capacity: 10}
demands:
  - {id: d0, source: s, sink: t, volume: 2, compute: {cpu: 2}}
  - {id: d1, source: s, sink: t, volume: 3, compute: {cpu: 1}}
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------- fixtures


@pytest.mark.parametrize("name, nodes, links, cap, hosts", [
    ("abilene", 12, 30, 40000.0, 2),
    ("geant", 23, 74, 80000.0, 3),
])
def test_bundled_shapes(name, nodes, links, cap, hosts):
    net = load_topology(f"bundled:{name}")
    assert (net.num_nodes, net.num_links) == (nodes, links)
    assert set(net.capacity) == {cap}
    assert len(net.compute_nodes()) == hosts


def test_bundled_files_match_builders():
    for name, build in BUILDERS.items():
        doc = build()
        loaded = load_topology_document(bundled_path(name))
        assert loaded.network.node_ids == doc.network.node_ids
        assert np.allclose(loaded.network.capacity, doc.network.capacity)
        assert [d.id for d in loaded.demands] == [d.id for d in doc.demands]


def test_unknown_bundled_name():
    with pytest.raises(DocumentError, match="unknown bundled"):
        bundled_path("arpanet")


# ---------------------------------------------------------------- topology documents


def test_topology_round_trip(tiny, tmp_path):
    doc = load_topology_document(tiny)
    out = tmp_path / "copy.yaml"
    dump_topology(doc.network, out, doc.demands, {"note": "x"})
    again = load_topology_document(out)
    assert again.network.node_ids == doc.network.node_ids
    assert [e.id for e in again.network.links] == ["sz", "zt", "st"]
    assert again.demands == doc.demands
    assert again.metadata["note"] == "x"
    assert load_demands(out) == doc.demands


def test_duplicate_link_is_line_anchored(tmp_path):
    text = TINY.replace("{id: st, src: s", "{id: sz, src: s")
    with pytest.raises(DocumentError) as info:
        load_topology(write(tmp_path, "dup.yaml", text))
    (msg,) = info.value.errors
    assert msg.startswith(f"{tmp_path / 'dup.yaml'}:11: id:") and "duplicate link" in msg


def test_errors_are_all_reported(tmp_path):
    text = TINY.replace("capacity: 10}\n  - {id: zt", "capacity: lots}\n  - {id: zt").replace(
        "dst: t, capacity: 10}\ndemands", "dst: q, capacity: 10}\ndemands")
    with pytest.raises(DocumentError) as info:
        load_topology(write(tmp_path, "bad.yaml", text))
    joined = "\n".join(info.value.errors)
    assert "capacity: expected float" in joined and "unknown node 'q'" in joined


def test_missing_field_and_version(tmp_path):
    with pytest.raises(DocumentError, match="links: missing required field"):
        load_topology(write(tmp_path, "a.yaml", "nodes: [{id: a}]\n"))
    with pytest.raises(DocumentError, match="unsupported version 2"):
        load_topology(write(tmp_path, "b.yaml", TINY.replace("schema_version: 1", "schema_version: 2")))


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DocumentError, match="nope.yaml"):
        load_topology(tmp_path / "nope.yaml")


def test_semantic_errors_surface(tmp_path):
    text = TINY.replace("sink: t, volume: 2", "sink: s, volume: 2")
    with pytest.raises(DocumentError):
        load_topology(write(tmp_path, "loop.yaml", text))


# ---------------------------------------------------------------- plans


def test_minimal_online_plan_gets_defaults(tmp_path):
    plan = load_plan(write(tmp_path, "p.yaml", "topology: bundled:smart-city\nmodes: online\n"))
    assert plan.modes == ["online"]
    assert plan.scenario.arrival_rate == 2.0 and plan.scenario.link_capacity == 550.0
    assert plan.seeds == [0] and plan.format == "structured"


def test_negative_sigma_is_rejected(tmp_path):
    text = "topology: bundled:smart-city\nmodes: [online]\nscenario:\n  duration_sigma: -1\n"
    with pytest.raises(DocumentError, match="p.yaml:4: scenario"):
        load_plan(write(tmp_path, "p.yaml", text))


def test_unknown_fields_and_modes(tmp_path):
    text = "topology: bundled:vr-1\nmodes: [mip, teleport]\ncolour: blue\n"
    with pytest.raises(DocumentError) as info:
        load_plan(write(tmp_path, "p.yaml", text))
    joined = "\n".join(info.value.errors)
    assert "unknown mode 'teleport'" in joined and "colour: unknown field" in joined


def test_walk_mode_with_split_demand_is_incompatible(tmp_path, tiny):
    text = (f"topology: {tiny}\nmodes: [sr-tsp]\n"
            "demands:\n  - {id: a, source: s, sink: t, volume: 1, compute: {cpu: 1}, split_limit: 2}\n")
    with pytest.raises(DocumentError, match="split_limit 2"):
        load_plan(write(tmp_path, "p.yaml", text))


def test_budget_needs_infinite_mode(tmp_path, tiny):
    text = f"topology: {tiny}\nmodes: [mip]\noptions: {{budget: 5}}\n"
    with pytest.raises(DocumentError, match="budget"):
        load_plan(write(tmp_path, "p.yaml", text))


def test_static_plan_without_demands(tmp_path):
    with pytest.raises(DocumentError, match="static modes need demands"):
        load_plan(write(tmp_path, "p.yaml", "topology: bundled:smart-city\nmodes: mip\n"))


def test_relative_paths_resolve_against_plan(tmp_path, tiny):
    plan = load_plan(write(tmp_path, "p.yaml", "topology: tiny.yaml\nmodes: mip\noutput: out.json\n"))
    assert plan.topology == tiny and plan.output == tmp_path / "out.json"


# ---------------------------------------------------------------- runner


def test_record_grid(tiny):
    plan = ExperimentPlan(topology=tiny, modes=["mip", "sr-infinite"], seeds=[0, 1])
    records = run_experiment(plan)
    assert [(r.seed, r.mode) for r in records] == [
        (0, "mip"), (0, "sr-infinite"), (1, "mip"), (1, "sr-infinite")]
    assert all(r.status == "optimal" for r in records)
    assert records[1].value <= records[0].value + 1e-9


def test_k_sweep_never_gets_worse():
    plan = ExperimentPlan(topology=bundled_path("vr-3"), modes=["mip-k"], ks=[1, 2, 3])
    values = [r.objective for r in run_experiment(plan)]
    assert len(values) == 3
    assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))


def test_scales_and_gaps(tiny):
    plan = ExperimentPlan(topology=tiny, modes=["mip", "greedy-nearest"], scales=[1.0, 1.5],
                          reference="mip")
    records = run_experiment(plan)
    assert [r.scale for r in records] == [1.0, 1.0, 1.5, 1.5]
    assert all(r.gap >= -1e-9 for r in records)
    assert records[0].gap == 0.0
    assert records[2].value > records[0].value
    rows = gap_table(records, "mip")
    assert rows[0]["mode"] == "greedy-nearest" and rows[0]["instances"] == 2


def test_callback_sees_each_record(tiny):
    seen = []
    plan = ExperimentPlan(topology=tiny, modes=["sr-infinite", "greedy-alloc"])
    records = run_experiment(plan, on_record=seen.append)
    assert seen == records


def test_utilization_is_flow_over_capacity(tiny):
    (rec,) = run_experiment(ExperimentPlan(topology=tiny, modes=["sr-infinite"]))
    net = load_topology(tiny)
    assert np.allclose(rec.utilization, np.array(rec.flows) / net.capacity)
    assert sum(rec.allocation.values()) == pytest.approx(3.0)


@pytest.mark.parametrize("fmt, suffix", [("structured", ".json"), ("rows", ".csv")])
def test_emit_and_reload(tmp_path, tiny, fmt, suffix):
    plan = ExperimentPlan(topology=tiny, modes=["mip", "sr-infinite", "greedy-nearest"], seeds=[0, 3])
    records = run_experiment(plan)
    paths = emit_results(records, tmp_path / f"res{suffix}", fmt)
    assert load_results(paths[0]) == records
    if fmt == "rows":
        with paths[1].open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(records) * 3
        assert {r["link"] for r in rows} == {"sz", "zt", "st"}
    else:
        assert json.loads(paths[0].read_text())["schema_version"] == 1


def test_emit_reports_path(tmp_path, tiny):
    records = run_experiment(ExperimentPlan(topology=tiny, modes=["sr-infinite"]))
    with pytest.raises(OSError, match="missing"):
        emit_results(records, tmp_path / "missing" / "r.json")


def test_online_modes_share_trace():
    plan = ExperimentPlan(topology=bundled_path("smart-city"),
                          modes=["online", "online-safe", "shortest-path"],
                          scenario=ScenarioConfig(horizon=15))
    records = run_experiment(plan)
    assert [r.mode for r in records] == ["online", "online-safe", "shortest-path"]
    safe = records[1]
    assert safe.status == "feasible" and max(safe.utilization) <= 1 + 1e-9
    assert len(safe.links) == load_topology("bundled:smart-city").num_links


# ---------------------------------------------------------------- generator


def test_generator_is_seeded():
    spec = InstanceSpec(num_nodes=9, num_demands=4, seed=12)
    a, b = gen_random_instance(spec), gen_random_instance(spec)
    assert a.network.node_ids == b.network.node_ids
    assert [e.id for e in a.network.links] == [e.id for e in b.network.links]
    assert a.demands == b.demands
    assert gen_random_instance(InstanceSpec(num_nodes=9, num_demands=4, seed=13)).demands != a.demands


def test_generator_margin_and_density():
    spec = InstanceSpec(num_nodes=10, density=0.4, num_compute=3, num_demands=5, margin=0.25, seed=4)
    doc = gen_random_instance(spec)
    total = sum(d.work("cpu") for d in doc.demands)
    capacity = sum(n.capacity("cpu") for n in doc.network.nodes)
    assert capacity >= 1.25 * total - 1e-9
    assert doc.network.num_links == round(0.4 * 90)
    assert len(doc.network.compute_nodes()) == 3


def test_generator_output_always_validates():
    for seed in range(1000):
        doc = gen_random_instance(InstanceSpec(num_nodes=4 + seed % 9, seed=seed, density=0.35))
        assert not validate_network(doc.network, doc.demands).errors


def test_generator_rejects_sparse():
    with pytest.raises(ValueError, match="strongly connected"):
        gen_random_instance(InstanceSpec(num_nodes=10, density=0.05))
