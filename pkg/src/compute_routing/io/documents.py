"""YAML documents for topologies, demands and experiment plans.

Every document carries ``schema_version``. Parse problems are reported as
``path:line: field: message`` so they can be fixed without guesswork, and a
loader either returns a complete object or raises :class:`DocumentError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ..netmodel import Demand, Link, Network, NetworkError, Node, validate_network
from ..online.trace import ScenarioConfig

SCHEMA_VERSION = 1
BUNDLED = ("abilene", "geant", "smart-city", "vr-1", "vr-2", "vr-3", "vr-4")
MODES = (
    "mip", "mip-k", "sr-infinite", "sr-tsp", "sr-iteration", "greedy-alloc",
    "greedy-nearest", "online", "online-safe", "shortest-path", "offline-opt",
)
ONLINE_MODES = ("online", "online-safe", "shortest-path", "offline-opt")
WALK_MODES = ("mip", "mip-k", "sr-tsp")


class DocumentError(ValueError):
    """Schema or validation problems, each anchored to a line when known."""

    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


class _Mapping(dict):
    line: int = 0


class _Sequence(list):
    line: int = 0


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _Mapping()
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in out:
            raise yaml.MarkedYAMLError(
                "while constructing a mapping", node.start_mark,
                f"duplicate key {key!r}", key_node.start_mark,
            )
        out[key] = loader.construct_object(value_node, deep=True)
    out.line = node.start_mark.line + 1
    return out


def _construct_sequence(loader, node):
    out = _Sequence(loader.construct_object(child, deep=True) for child in node.value)
    out.line = node.start_mark.line + 1
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)
_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_sequence)


def _parse(text: str, where: str) -> Any:
    try:
        return yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else 0
        raise DocumentError([f"{where}:{line}: {exc.problem or exc.context}"]) from None
    except yaml.YAMLError as exc:
        raise DocumentError([f"{where}: {exc}"]) from None


class _Reader:
    """Collects anchored errors while fields are pulled out of a mapping."""

    def __init__(self, where: str):
        self.where = where
        self.errors: list[str] = []

    def error(self, obj, name: str, message: str):
        line = getattr(obj, "line", 0)
        self.errors.append(f"{self.where}:{line}: {name}: {message}")

    def get(self, obj, name: str, kind=None, default=..., required=False):
        if not isinstance(obj, dict):
            self.error(obj, name, "expected a mapping")
            return None
        if name not in obj:
            if required or default is ...:
                self.error(obj, name, "missing required field")
                return None
            return default
        value = obj[name]
        if kind is not None and value is not None:
            try:
                if kind is float and isinstance(value, bool):
                    raise TypeError
                value = kind(value)
            except (TypeError, ValueError):
                self.error(obj, name, f"expected {kind.__name__}, got {value!r}")
                return None
        return value

    def resource_map(self, obj, name: str) -> dict[str, float]:
        raw = self.get(obj, name, default={}) or {}
        if not isinstance(raw, dict):
            self.error(obj, name, "expected a mapping of resource type to amount")
            return {}
        out = {}
        for r, v in raw.items():
            try:
                out[str(r)] = float(v)
            except (TypeError, ValueError):
                self.error(obj, f"{name}.{r}", f"expected a number, got {v!r}")
        return out

    def check_version(self, doc):
        version = self.get(doc, "schema_version", int, default=SCHEMA_VERSION)
        if version is not None and version != SCHEMA_VERSION:
            self.error(doc, "schema_version", f"unsupported version {version}")

    def raise_if_errors(self):
        if self.errors:
            raise DocumentError(self.errors)


def _read_text(path: str | Path) -> tuple[str, str]:
    path = Path(path)
    try:
        return path.read_text(), str(path)
    except OSError as exc:
        raise DocumentError([f"{path}: {exc.strerror}"]) from None


def bundled_path(name: str) -> Path:
    """Path of a bundled fixture (``abilene``, ``geant``, ``smart-city``, ``vr-N``)."""
    if name not in BUNDLED:
        raise DocumentError([f"unknown bundled fixture {name!r}; choose from {', '.join(BUNDLED)}"])
    return Path(str(resources.files("compute_routing") / "data" / f"{name}.yaml"))


def resolve_path(ref: str | Path, base: Path | None = None) -> Path:
    ref = str(ref)
    if ref.startswith("bundled:"):
        return bundled_path(ref.split(":", 1)[1])
    path = Path(ref)
    if not path.is_absolute() and base is not None:
        path = base / path
    return path


def _demands(reader: _Reader, items) -> list[Demand]:
    if not isinstance(items, list):
        reader.error(items, "demands", "expected a list")
        return []
    out, seen = [], set()
    for item in items:
        did = reader.get(item, "id", required=True)
        if did in seen:
            reader.error(item, "id", f"duplicate demand id {did!r}")
        seen.add(did)
        src = reader.get(item, "source", str, required=True)
        dst = reader.get(item, "sink", str, required=True)
        volume = reader.get(item, "volume", float, required=True)
        compute = reader.resource_map(item, "compute")
        scale = reader.get(item, "scale", default=1.0)
        if isinstance(scale, list):
            scale = tuple(float(s) for s in scale)
        elif scale is not None:
            try:
                scale = float(scale)
            except (TypeError, ValueError):
                reader.error(item, "scale", f"expected a number or list, got {scale!r}")
                scale = 1.0
        split = reader.get(item, "split_limit", default=1)
        processing = reader.get(item, "processing", str, default="splittable")
        if None in (did, src, dst, volume):
            continue
        if not volume > 0:
            reader.error(item, "volume", "must be positive")
            continue
        if split is not None and (not isinstance(split, int) or split < 1):
            reader.error(item, "split_limit", "must be a positive integer or null")
            continue
        try:
            out.append(Demand(did, src, dst, volume, compute, scale, split, processing))
        except ValueError as exc:
            reader.error(item, "processing", str(exc))
    return out


@dataclass
class TopologyDocument:
    network: Network
    demands: list[Demand] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def parse_topology(text: str, where: str = "<topology>") -> TopologyDocument:
    doc = _parse(text, where)
    reader = _Reader(where)
    if not isinstance(doc, dict):
        raise DocumentError([f"{where}:1: document must be a mapping"])
    reader.check_version(doc)
    nodes, links, seen_nodes, seen_links = [], [], set(), set()
    for item in reader.get(doc, "nodes", required=True) or []:
        nid = reader.get(item, "id", str, required=True)
        if nid is None:
            continue
        if nid in seen_nodes:
            reader.error(item, "id", f"duplicate node id {nid!r}")
            continue
        seen_nodes.add(nid)
        compute = reader.resource_map(item, "compute")
        util = reader.resource_map(item, "utilization")
        nodes.append(Node(nid, compute, util))
    for item in reader.get(doc, "links", required=True) or []:
        src = reader.get(item, "src", str, required=True)
        dst = reader.get(item, "dst", str, required=True)
        lid = reader.get(item, "id", str, default=f"{src}->{dst}")
        cap = reader.get(item, "capacity", float, required=True)
        delay = reader.get(item, "delay", float, default=0.0)
        if None in (src, dst, cap, lid):
            continue
        if lid in seen_links:
            reader.error(item, "id", f"duplicate link id {lid!r}")
            continue
        seen_links.add(lid)
        for end, name in ((src, "src"), (dst, "dst")):
            if end not in seen_nodes:
                reader.error(item, name, f"unknown node {end!r}")
        links.append(Link(lid, src, dst, cap, delay))
    demands = _demands(reader, doc["demands"]) if "demands" in doc else []
    reader.raise_if_errors()
    metadata = dict(reader.get(doc, "metadata", default={}) or {})
    name = str(doc.get("name", metadata.get("name", Path(where).stem)))
    try:
        network = Network(nodes, links, name=name)
    except NetworkError as exc:
        raise DocumentError([f"{where}: {e}" for e in exc.errors]) from None
    diag = validate_network(network, demands)
    if diag.errors:
        raise DocumentError([f"{where}: {e}" for e in diag.errors])
    return TopologyDocument(network, demands, metadata)


def load_topology(path: str | Path) -> Network:
    """Parse and validate a topology document (``bundled:NAME`` allowed)."""
    return load_topology_document(path).network


def load_topology_document(path: str | Path) -> TopologyDocument:
    text, where = _read_text(resolve_path(path))
    return parse_topology(text, where)


def load_demands(path: str | Path) -> list[Demand]:
    """Demands from a demand document or a topology document that has them."""
    text, where = _read_text(resolve_path(path))
    doc = _parse(text, where)
    reader = _Reader(where)
    reader.check_version(doc)
    demands = _demands(reader, reader.get(doc, "demands", required=True) or [])
    reader.raise_if_errors()
    return demands


def topology_to_dict(network: Network, demands=(), metadata: dict | None = None) -> dict:
    out: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "name": network.name}
    if metadata:
        out["metadata"] = dict(metadata)
    out["nodes"] = []
    for n in network.nodes:
        item: dict[str, Any] = {"id": n.id}
        if n.compute:
            item["compute"] = dict(n.compute)
        if n.utilization:
            item["utilization"] = dict(n.utilization)
        out["nodes"].append(item)
    out["links"] = []
    for e in network.links:
        item = {"id": e.id, "src": e.src, "dst": e.dst, "capacity": e.capacity}
        if e.delay:
            item["delay"] = e.delay
        out["links"].append(item)
    if demands:
        out["demands"] = [demand_to_dict(d) for d in demands]
    return out


def demand_to_dict(d: Demand) -> dict:
    item: dict[str, Any] = {"id": d.id, "source": d.source, "sink": d.sink, "volume": d.volume}
    if d.compute:
        item["compute"] = dict(d.compute)
    if d.scale != 1.0:
        item["scale"] = list(d.scale) if isinstance(d.scale, tuple) else d.scale
    if d.split_limit != 1:
        item["split_limit"] = d.split_limit
    if d.processing != "splittable":
        item["processing"] = d.processing
    return item


def dump_topology(network: Network, path: str | Path, demands=(), metadata=None) -> None:
    Path(path).write_text(
        yaml.safe_dump(topology_to_dict(network, demands, metadata), sort_keys=False)
    )


@dataclass
class ExperimentPlan:
    """A fully resolved experiment.

    Every combination of ``modes``, ``seeds``, ``scales`` and (for the
    split modes) ``ks`` is one cell. ``sample_fraction`` below 1 draws that
    share of the demands per seed.
    """

    topology: Path
    modes: list[str]
    demands: Path | None = None
    inline_demands: list[Demand] | None = None
    scenario: ScenarioConfig | None = None
    ks: list[int] = field(default_factory=lambda: [1])
    scales: list[float] = field(default_factory=lambda: [1.0])
    seeds: list[int] = field(default_factory=lambda: [0])
    sample_fraction: float = 1.0
    aggregate: bool = False
    use_scale: bool = True
    scale_factor: float | None = None
    budget: float | None = None
    chain: list[str] | None = None
    reference: str | None = None
    time_limit: float | None = None
    output: Path | None = None
    format: str = "structured"
    name: str = "experiment"


_SCENARIO_FIELDS = {f.name: f for f in fields(ScenarioConfig) if f.name != "extra"}


def _scenario(reader: _Reader, raw) -> ScenarioConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        reader.error(raw, "scenario", "expected a mapping")
        return None
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in _SCENARIO_FIELDS:
            reader.error(raw, f"scenario.{key}", "unknown field")
            continue
        if key == "pairs":
            if not isinstance(value, list) or any(
                not isinstance(p, list) or len(p) != 2 for p in value
            ):
                reader.error(raw, "scenario.pairs", "expected a list of [source, sink]")
                continue
            kwargs[key] = tuple((str(a), str(b)) for a, b in value)
        elif key in ("seed", "k", "num_pairs"):
            kwargs[key] = reader.get(raw, key, int)
        elif key == "resource":
            kwargs[key] = str(value)
        else:
            kwargs[key] = reader.get(raw, key, float)
    if any(v is None and k not in ("link_capacity", "node_capacity") for k, v in kwargs.items()):
        return None
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        reader.error(raw, "scenario", str(exc))
        return None


def _as_list(value, kind):
    if value is None:
        return None
    items = value if isinstance(value, list) else [value]
    return [kind(v) for v in items]


def parse_plan(text: str, where: str = "<plan>", base: Path | None = None) -> ExperimentPlan:
    doc = _parse(text, where)
    reader = _Reader(where)
    if not isinstance(doc, dict):
        raise DocumentError([f"{where}:1: document must be a mapping"])
    reader.check_version(doc)
    known = {
        "schema_version", "name", "topology", "demands", "scenario", "modes", "mode",
        "k", "scales", "seeds", "options", "reference", "output", "format", "time_limit",
    }
    for key in doc:
        if key not in known:
            reader.error(doc, key, "unknown field")
    topo = reader.get(doc, "topology", str, required=True)
    modes_raw = doc.get("modes", doc.get("mode"))
    modes = []
    if modes_raw is None:
        reader.error(doc, "modes", "missing required field")
    else:
        for m in _as_list(modes_raw, str):
            if m not in MODES:
                reader.error(doc, "modes", f"unknown mode {m!r}; choose from {', '.join(MODES)}")
            modes.append(m)
    demands_ref, inline = None, None
    raw_demands = doc.get("demands")
    if isinstance(raw_demands, list):
        inline = _demands(reader, raw_demands)
    elif raw_demands is not None:
        demands_ref = resolve_path(str(raw_demands), base)
    scenario = None
    if "scenario" in doc or any(m in ONLINE_MODES for m in modes):
        scenario = _scenario(reader, doc.get("scenario") or _Mapping())
    options = reader.get(doc, "options", default={}) or {}
    try:
        ks = _as_list(doc.get("k", 1), int)
        scales = _as_list(doc.get("scales", 1.0), float)
        seeds = _as_list(doc.get("seeds", 0), int)
    except (TypeError, ValueError) as exc:
        reader.error(doc, "k/scales/seeds", f"bad value ({exc})")
        ks, scales, seeds = [1], [1.0], [0]
    if any(k < 1 for k in ks):
        reader.error(doc, "k", "every k must be at least 1")
    if any(not s > 0 for s in scales):
        reader.error(doc, "scales", "every scale must be positive")
    fmt = reader.get(doc, "format", str, default="structured")
    if fmt not in ("structured", "rows"):
        reader.error(doc, "format", "expected 'structured' or 'rows'")
    fraction = reader.get(options, "sample_fraction", float, default=1.0)
    if fraction is not None and not 0 < fraction <= 1:
        reader.error(options, "sample_fraction", "must lie in (0, 1]")
    budget = reader.get(options, "budget", float, default=None)
    if budget is not None and not budget > 0:
        reader.error(options, "budget", "must be positive")
    chain = options.get("chain") if isinstance(options, dict) else None
    plan = ExperimentPlan(
        topology=resolve_path(topo, base) if topo else Path(),
        modes=modes,
        demands=demands_ref,
        inline_demands=inline,
        scenario=scenario,
        ks=ks,
        scales=scales,
        seeds=seeds,
        sample_fraction=fraction or 1.0,
        aggregate=bool(reader.get(options, "aggregate", default=False)),
        use_scale=bool(reader.get(options, "use_scale", default=True)),
        scale_factor=reader.get(options, "scale_factor", float, default=None),
        budget=budget,
        chain=list(chain) if chain else None,
        reference=reader.get(doc, "reference", str, default=None),
        time_limit=reader.get(doc, "time_limit", float, default=None),
        output=resolve_path(doc["output"], base) if doc.get("output") else None,
        format=fmt or "structured",
        name=str(doc.get("name", Path(where).stem)),
    )
    if plan.reference is not None and plan.reference not in MODES:
        reader.error(doc, "reference", f"unknown mode {plan.reference!r}")
    reader.raise_if_errors()
    _check_compatibility(plan, where, doc)
    return plan


def _check_compatibility(plan: ExperimentPlan, where: str, doc) -> None:
    errors = []
    line = getattr(doc, "line", 0)
    static = [m for m in plan.modes if m not in ONLINE_MODES]
    if static and plan.demands is None and plan.inline_demands is None:
        try:
            has = bool(load_topology_document(plan.topology).demands)
        except DocumentError:
            has = True  # reported when the topology is loaded
        if not has:
            errors.append(f"{where}:{line}: demands: static modes need demands")
    if plan.chain and any(m not in ("sr-infinite", "greedy-alloc") for m in static):
        errors.append(f"{where}:{line}: options.chain: only sr-infinite supports processing chains")
    if plan.budget is not None and any(m != "sr-infinite" for m in static):
        errors.append(f"{where}:{line}: options.budget: only sr-infinite provisions compute")
    if plan.scale_factor not in (None, 1.0) and any(m in WALK_MODES for m in static):
        errors.append(f"{where}:{line}: options.scale_factor: walk modes carry no scaling")
    if any(m in WALK_MODES for m in static):
        demands = plan.inline_demands
        if demands is None and plan.demands is not None:
            try:
                demands = load_demands(plan.demands)
            except DocumentError:
                demands = []
        for d in demands or []:
            if d.split_limit != 1:
                errors.append(
                    f"{where}:{line}: modes: {', '.join(m for m in static if m in WALK_MODES)} "
                    f"route unsplit walks but demand {d.id!r} has split_limit {d.split_limit}"
                )
                break
    if errors:
        raise DocumentError(errors)


def load_plan(path: str | Path) -> ExperimentPlan:
    """Parse an experiment plan; omitted scenario fields take their defaults."""
    path = resolve_path(path)
    text, where = _read_text(path)
    return parse_plan(text, where, path.parent)
