"""Command-line entry point: ``compute-routing <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from ..netmodel import NetworkError
from ..online.splitgraph import split_compute_nodes
from ..online.trace import ScenarioConfig, apply_capacities, generate_trace, read_trace, write_trace
from .documents import (
    MODES,
    ONLINE_MODES,
    DocumentError,
    ExperimentPlan,
    dump_topology,
    load_plan,
    load_topology_document,
    resolve_path,
)
from .generate import InstanceSpec, gen_random_instance
from .runner import ResultRecord, emit_results, gap_table, run_experiment

log = logging.getLogger("compute_routing")

STATIC_MODES = [m for m in MODES if m not in ONLINE_MODES]
# the violating online variant reports capacity overruns by design
SUCCESS = ("optimal", "feasible", "violated", "node-limit")


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--out", type=Path, default=None, help="output file")
    common.add_argument("--format", choices=("structured", "rows"), default=None,
                        help="result file layout (default structured)")
    common.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="compute-routing",
                                     description="Routing through in-network compute nodes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve a static instance")
    p.add_argument("topology", help="topology file or bundled:NAME")
    p.add_argument("--demands", help="demand file (default: demands in the topology file)")
    p.add_argument("--mode", action="append", choices=STATIC_MODES,
                   help="may repeat (default sr-infinite)")
    p.add_argument("-k", type=int, action="append", help="split limit for mip-k / sr-iteration")
    p.add_argument("--scale", type=float, action="append", help="demand scale multiplier")
    p.add_argument("--aggregate", action="store_true")
    p.add_argument("--ignore-scale", action="store_true", help="treat all scale factors as 1")
    p.add_argument("--budget", type=float, help="total compute budget (sr-infinite)")
    p.add_argument("--chain", help="comma-separated resource types (sr-infinite)")
    p.add_argument("--time-limit", type=float)
    p.add_argument("--reference", choices=STATIC_MODES)

    p = sub.add_parser("online", parents=[common], help="simulate online admission")
    p.add_argument("topology", nargs="?", default="bundled:smart-city")
    p.add_argument("--variant", action="append",
                   choices=("online", "online-safe", "shortest-path", "offline-opt"),
                   help="may repeat (default online)")
    p.add_argument("--rate", type=float, help="arrivals per time unit")
    p.add_argument("--horizon", type=float)
    p.add_argument("--ratio", type=float, help="node resource ratio")
    p.add_argument("--trace-in", type=Path, help="replay this trace instead of generating")
    p.add_argument("--trace-out", type=Path, help="save the generated trace")
    p.add_argument("--time-limit", type=float, help="offline-opt MIP time limit")

    p = sub.add_parser("transform", parents=[common], help="print the split graph")
    p.add_argument("topology")
    p.add_argument("--ratio", type=float, help="uniform node resource ratio")

    p = sub.add_parser("gen", parents=[common], help="write a random instance")
    p.add_argument("--nodes", type=int, default=8)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--compute", type=int, default=2)
    p.add_argument("--demands", type=int, default=3)
    p.add_argument("--margin", type=float, default=0.5)

    p = sub.add_parser("run", parents=[common], help="execute an experiment plan")
    p.add_argument("plan", type=Path)

    p = sub.add_parser("compare", parents=[common], help="gap table against a reference mode")
    p.add_argument("topology", nargs="+", help="one or more topologies (bundled:NAME allowed)")
    p.add_argument("--mode", action="append", choices=STATIC_MODES,
                   help="may repeat (default sr-tsp, sr-iteration, greedy-nearest)")
    p.add_argument("--reference", default="mip", choices=STATIC_MODES)
    p.add_argument("-k", type=int, action="append")
    return parser


def _summary(records: list[ResultRecord]) -> str:
    head = f"{'mode':<16}{'instance':<14}{'seed':>5}{'scale':>7}{'k':>4}  {'status':<11}{'value':>14}{'gap':>9}"
    lines = [head]
    for r in records:
        value = "-" if r.value is None else f"{r.value:.6g}"
        gap = "" if r.gap is None else f"{100 * r.gap:.2f}%"
        lines.append(f"{r.mode:<16}{r.instance:<14}{r.seed:>5}{r.scale:>7g}{r.k or '':>4}  "
                     f"{r.status:<11}{value:>14}{gap:>9}")
    return "\n".join(lines)


def _finish(records, args, plan: ExperimentPlan | None = None) -> int:
    print(_summary(records))
    out = args.out or (plan.output if plan else None)
    if out is not None:
        fmt = args.format or (plan.format if plan else "structured")
        for path in emit_results(records, out, fmt):
            print(f"wrote {path}")
    return 0 if all(r.status in SUCCESS for r in records) else 3


def _cmd_solve(args) -> int:
    plan = ExperimentPlan(
        topology=resolve_path(args.topology),
        modes=args.mode or ["sr-infinite"],
        demands=resolve_path(args.demands) if args.demands else None,
        ks=args.k or [1],
        scales=args.scale or [1.0],
        seeds=[args.seed or 0],
        aggregate=args.aggregate,
        use_scale=not args.ignore_scale,
        budget=args.budget,
        chain=args.chain.split(",") if args.chain else None,
        time_limit=args.time_limit,
        reference=args.reference,
    )
    return _finish(run_experiment(plan), args)


def _cmd_online(args) -> int:
    doc = load_topology_document(args.topology)
    kwargs = {"seed": args.seed or 0}
    if args.rate is not None:
        kwargs["arrival_rate"] = args.rate
    if args.horizon is not None:
        kwargs["horizon"] = args.horizon
    if args.ratio is not None:
        kwargs["resource_ratio"] = args.ratio
    if doc.metadata.get("pairs"):
        kwargs["pairs"] = tuple(tuple(p) for p in doc.metadata["pairs"])
    scenario = ScenarioConfig(**kwargs)
    if args.trace_out is not None:
        write_trace(generate_trace(scenario, apply_capacities(doc.network, scenario)), args.trace_out)
        log.info("trace written to %s", args.trace_out)
    plan = ExperimentPlan(
        topology=resolve_path(args.topology),
        modes=args.variant or ["online"],
        scenario=scenario,
        seeds=[scenario.seed],
        time_limit=args.time_limit,
    )
    trace = read_trace(args.trace_in) if args.trace_in is not None else None
    return _finish(run_experiment(plan, trace=trace), args)


def _cmd_transform(args) -> int:
    doc = load_topology_document(args.topology)
    graph = split_compute_nodes(doc.network, ratio=args.ratio)
    data = {
        "resource": graph.resource,
        "nodes": [list(v) if isinstance(v, tuple) else v for v in graph.nodes],
        "links": [
            {
                "index": link.index,
                "src": list(link.src) if isinstance(link.src, tuple) else link.src,
                "dst": list(link.dst) if isinstance(link.dst, tuple) else link.dst,
                "kind": link.kind,
                "capacity": float(link.capacity),
                "origin": link.origin,
            }
            for link in graph.links
        ],
    }
    text = json.dumps(data, indent=1) if args.format == "structured" else yaml.safe_dump(data, sort_keys=False)
    if args.out:
        args.out.write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_gen(args) -> int:
    spec = InstanceSpec(num_nodes=args.nodes, density=args.density, num_compute=args.compute,
                        num_demands=args.demands, margin=args.margin, seed=args.seed or 0)
    doc = gen_random_instance(spec)
    out = args.out or Path(f"random-{spec.seed}.yaml")
    dump_topology(doc.network, out, doc.demands, doc.metadata)
    print(f"wrote {out}")
    return 0


def _cmd_run(args) -> int:
    plan = load_plan(args.plan)
    if args.seed is not None:
        plan = replace(plan, seeds=[args.seed])
    return _finish(run_experiment(plan), args, plan)


def _cmd_compare(args) -> int:
    modes = args.mode or ["sr-tsp", "sr-iteration", "greedy-nearest"]
    records = []
    for topo in args.topology:
        plan = ExperimentPlan(topology=resolve_path(topo), modes=[args.reference] + modes,
                              ks=args.k or [1], seeds=[args.seed or 0], reference=args.reference)
        records.extend(run_experiment(plan))
    code = _finish(records, args)
    print()
    print(f"{'mode':<22}{'instances':>10}{'mean gap':>11}{'max gap':>10}")
    for row in gap_table(records, args.reference):
        print(f"{row['mode']:<22}{row['instances']:>10}{100 * row['mean_gap']:>10.2f}%"
              f"{100 * row['max_gap']:>9.2f}%")
    return code


COMMANDS = {
    "solve": _cmd_solve,
    "online": _cmd_online,
    "transform": _cmd_transform,
    "gen": _cmd_gen,
    "run": _cmd_run,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DocumentError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    except (NetworkError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
