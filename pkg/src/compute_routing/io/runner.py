"""Experiment cells, result records and their files."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Hashable, Iterable

import numpy as np

from ..heuristics import greedy_nearest_baseline, sr_iteration, sr_tsp
from ..netmodel import Demand, Network
from ..online.router import SAFE, SHORTEST, VIOLATING, candidate_sets, offline_optimum, simulate
from ..online.splitgraph import PHYSICAL, split_compute_nodes
from ..online.trace import ScenarioConfig, apply_capacities, generate_trace
from ..static import (
    FormulationOptions,
    greedy_alloc_baseline,
    solve_mip_k,
    solve_mip_rinp,
    solve_sr_infinite,
)
from .documents import (
    SCHEMA_VERSION,
    DocumentError,
    ExperimentPlan,
    load_demands,
    load_topology_document,
)

log = logging.getLogger(__name__)

ONLINE_VARIANT = {"online": VIOLATING, "online-safe": SAFE, "shortest-path": SHORTEST}
K_MODES = ("mip-k", "sr-iteration")


@dataclass
class ResultRecord:
    """One (mode, instance, seed, scale, k) cell.

    ``value`` is the figure of merit: total delay for static modes, accepted
    volume for online modes. ``utilization`` lists ``load / capacity`` per
    physical link in ``links`` order (peak slot for online modes).
    """

    mode: str
    instance: str
    seed: int
    scale: float
    k: int | None
    status: str
    value: float | None
    objective: float | None = None
    delay: float | None = None
    accepted_volume: float | None = None
    links: list[str] = field(default_factory=list)
    utilization: list[float] = field(default_factory=list)
    flows: list[float] = field(default_factory=list)
    allocation: dict[str, float] = field(default_factory=dict)
    wall_clock: float = 0.0
    gap: float | None = None
    unrouted: int = 0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        return cls(**data)


def _number(x) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _static_record(mode, network, demands, k, options) -> tuple[dict, np.ndarray | None]:
    if mode == "mip":
        sol = solve_mip_rinp(network, demands, options)
    elif mode == "mip-k":
        sol = solve_mip_k(network, demands, k, options)
    elif mode == "sr-infinite":
        sol = solve_sr_infinite(network, demands, options)
    elif mode == "greedy-alloc":
        sol = greedy_alloc_baseline(network, demands, options)
    elif mode == "sr-tsp":
        sol = sr_tsp(network, demands, options)
    elif mode == "sr-iteration":
        sol = sr_iteration(network, demands, k, options)
    elif mode == "greedy-nearest":
        sol = greedy_nearest_baseline(network, demands, options)
    else:
        raise ValueError(f"not a static mode: {mode}")
    alloc: dict[str, float] = {}
    for d in demands:
        if hasattr(sol, "node_allocation"):
            for r in d.compute:
                for z, w in sol.node_allocation(d.id, r).items():
                    alloc[str(z)] = alloc.get(str(z), 0.0) + w
        elif hasattr(sol, "paths"):
            for z, w in sol.allocation(d.id).items():
                if z is not None:
                    alloc[str(z)] = alloc.get(str(z), 0.0) + w
        elif sol.ok:
            for stage in range(len(sol.resources)):
                for z, w in sol.allocation(d, stage).items():
                    alloc[str(z)] = alloc.get(str(z), 0.0) + w
    info = {
        "status": sol.status,
        "objective": _number(sol.objective),
        "delay": _number(sol.delay),
        "allocation": alloc,
        "unrouted": len(getattr(sol, "unrouted", []) or []),
    }
    return info, sol.link_flow


def _options(plan: ExperimentPlan) -> FormulationOptions:
    return FormulationOptions(
        aggregate=plan.aggregate,
        use_scale=plan.use_scale,
        budget=plan.budget,
        chain=tuple(plan.chain) if plan.chain else None,
        time_limit=plan.time_limit,
    )


def sample_demands(demands: list[Demand], fraction: float, seed: int) -> list[Demand]:
    """A seeded subset of ``round(fraction * n)`` demands in original order."""
    if fraction >= 1:
        return list(demands)
    rng = np.random.default_rng(seed)
    count = max(1, round(fraction * len(demands)))
    keep = sorted(rng.choice(len(demands), size=count, replace=False))
    return [demands[i] for i in keep]


def _scenario_for(plan: ExperimentPlan, metadata: dict, seed: int) -> ScenarioConfig:
    scenario = plan.scenario or ScenarioConfig()
    if not scenario.pairs and metadata.get("pairs"):
        scenario = replace(scenario, pairs=tuple(tuple(p) for p in metadata["pairs"]))
    return replace(scenario, seed=seed)


def _scaled_trace(trace, scale: float):
    if scale == 1.0:
        return trace
    return [replace(dd, demand=dd.demand.scaled(scale)) for dd in trace]


def run_experiment(
    plan: ExperimentPlan,
    on_record: Callable[[ResultRecord], None] | None = None,
    trace: list | None = None,
) -> list[ResultRecord]:
    """Run every cell of ``plan``; modes of one (seed, scale) share inputs.

    ``on_record`` is called as each record completes. A given ``trace``
    replaces the generated one for online modes.
    """
    doc = load_topology_document(plan.topology)
    network = doc.network
    instance = network.name
    if plan.inline_demands is not None:
        base = plan.inline_demands
    elif plan.demands is not None:
        base = load_demands(plan.demands)
    else:
        base = doc.demands
    if plan.scale_factor is not None:
        base = [replace(d, scale=plan.scale_factor) for d in base]
    options = _options(plan)
    records: list[ResultRecord] = []

    def emit(rec: ResultRecord):
        records.append(rec)
        log.info("%s %s seed=%s scale=%s k=%s -> %s %s", rec.mode, rec.instance, rec.seed,
                 rec.scale, rec.k, rec.status, rec.value)
        if on_record is not None:
            on_record(rec)

    for seed in plan.seeds:
        online_ctx = None
        for scale in plan.scales:
            cell_start = len(records)
            demands = [d.scaled(scale) for d in sample_demands(base, plan.sample_fraction, seed)]
            for mode in plan.modes:
                for k in (plan.ks if mode in K_MODES else [None]):
                    start = time.perf_counter()
                    if mode in ONLINE_VARIANT or mode == "offline-opt":
                        if online_ctx is None:
                            scenario = _scenario_for(plan, doc.metadata, seed)
                            net = apply_capacities(network, scenario)
                            graph = split_compute_nodes(net, resource=scenario.resource)
                            arrivals = trace if trace is not None else generate_trace(scenario, net)
                            online_ctx = (scenario, net, graph, arrivals)
                        scenario, net, graph, arrivals = online_ctx
                        rec = _online_record(mode, instance, seed, scale, scenario, net, graph,
                                             _scaled_trace(arrivals, scale), plan.time_limit)
                    else:
                        info, flows = _static_record(mode, network, demands, k or 1, options)
                        value = info["delay"]
                        rec = ResultRecord(
                            mode, instance, seed, scale, k, info["status"], value,
                            objective=info["objective"], delay=info["delay"],
                            links=[str(e.id) for e in network.links],
                            utilization=[] if flows is None else list(map(float, flows / network.capacity)),
                            flows=[] if flows is None else list(map(float, flows)),
                            allocation=info["allocation"], unrouted=info["unrouted"],
                        )
                    rec.wall_clock = time.perf_counter() - start
                    emit(rec)
            if plan.reference:
                _fill_gaps(records[cell_start:], plan.reference)
    return records


def _online_record(mode, instance, seed, scale, scenario, net, graph, trace, time_limit):
    phys = [i for i, link in enumerate(graph.links) if link.kind == PHYSICAL]
    cands = candidate_sets(graph, trace, scenario.k)
    if mode == "offline-opt":
        res = offline_optimum(graph, trace, cands, scenario.slot_length, time_limit=time_limit)
        return ResultRecord(mode, instance, seed, scale, None, res.status, res.value,
                            objective=res.bound, accepted_volume=res.value)
    metrics = simulate(graph, trace, ONLINE_VARIANT[mode], scenario.slot_length, scenario.k, cands)
    state = metrics.state
    peak = state.load[phys].max(axis=1) if state.num_slots else np.zeros(len(phys))
    util = peak / state.capacity[phys]
    alloc: dict[str, float] = {}
    by_id = {dd.id: dd for dd in trace}
    for did in metrics.accepted:
        p = state.accepted[did]
        if p.processing is not None:
            dd = by_id[did]
            alloc[str(p.processing)] = alloc.get(str(p.processing), 0.0) + dd.demand.work(graph.resource)
    return ResultRecord(
        mode, instance, seed, scale, None,
        "feasible" if not metrics.violations else "violated",
        metrics.accepted_volume, accepted_volume=metrics.accepted_volume,
        links=[str(graph.links[i].origin) for i in phys],
        utilization=list(map(float, util)), flows=list(map(float, peak)),
        allocation=alloc, unrouted=metrics.rejection_count,
    )


def _fill_gaps(records: list[ResultRecord], reference: str) -> None:
    ref = [r for r in records if r.mode == reference]
    if not ref or ref[0].value is None or ref[0].value == 0:
        return
    base = ref[0].value
    for r in records:
        if r.value is not None:
            r.gap = (r.value - base) / base


def emit_results(records: list[ResultRecord], path: str | Path, fmt: str = "structured") -> list[Path]:
    """Write records; returns the files written.

    ``structured`` writes one JSON document. ``rows`` writes a CSV with one
    row per record plus ``<stem>_utilization.csv`` with one row per
    (record, link).
    """
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    try:
        if fmt == "structured":
            path.write_text(json.dumps(
                {"schema_version": SCHEMA_VERSION, "records": [r.to_dict() for r in records]},
                indent=1,
            ))
            return [path]
        if fmt != "rows":
            raise ValueError(f"unknown format {fmt!r}")
        scalar = [f for f in ResultRecord.__dataclass_fields__ if f not in ("links", "utilization", "flows")]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["record"] + scalar)
            for i, r in enumerate(records):
                row = [i]
                for name in scalar:
                    v = getattr(r, name)
                    row.append(json.dumps(v) if isinstance(v, dict) else _cell(v))
                writer.writerow(row)
        long_path = path.with_name(path.stem + "_utilization.csv")
        with long_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["record", "mode", "instance", "seed", "link", "flow", "utilization"])
            for i, r in enumerate(records):
                flows = r.flows or [""] * len(r.links)
                for link, f, u in zip(r.links, flows, r.utilization):
                    writer.writerow([i, r.mode, r.instance, r.seed, link, _cell(f), _cell(u)])
        return [path, long_path]
    except OSError as exc:
        raise OSError(f"{exc.filename or path}: {exc.strerror}") from None


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FLOATS = ("scale", "value", "objective", "delay", "accepted_volume", "wall_clock", "gap")
_INTS = ("seed", "k", "unrouted", "schema_version")


def load_results(path: str | Path) -> list[ResultRecord]:
    """Read records written by :func:`emit_results` in either format."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        if data.get("schema_version") != SCHEMA_VERSION:
            raise DocumentError([f"{path}: unsupported schema version"])
        return [ResultRecord.from_dict(r) for r in data["records"]]
    records: dict[int, ResultRecord] = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            idx = int(row.pop("record"))
            kwargs: dict = {}
            for name, raw in row.items():
                if name in _FLOATS:
                    kwargs[name] = float(raw) if raw != "" else None
                elif name in _INTS:
                    kwargs[name] = int(raw) if raw != "" else None
                elif name == "allocation":
                    kwargs[name] = json.loads(raw)
                else:
                    kwargs[name] = raw
            records[idx] = ResultRecord(**kwargs)
    long_path = path.with_name(path.stem + "_utilization.csv")
    if long_path.exists():
        with long_path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                r = records[int(row["record"])]
                r.links.append(row["link"])
                if row["flow"] != "":
                    r.flows.append(float(row["flow"]))
                r.utilization.append(float(row["utilization"]))
    return [records[i] for i in sorted(records)]


def gap_table(records: Iterable[ResultRecord], reference: str) -> list[dict]:
    """Per-mode mean and worst gap against ``reference`` over instances."""
    by_mode: dict[str, list[float]] = {}
    for r in records:
        if r.mode != reference and r.gap is not None:
            by_mode.setdefault(r.mode if r.k is None else f"{r.mode}(k={r.k})", []).append(r.gap)
    return [
        {"mode": m, "instances": len(g), "mean_gap": float(np.mean(g)), "max_gap": float(np.max(g))}
        for m, g in by_mode.items()
    ]
