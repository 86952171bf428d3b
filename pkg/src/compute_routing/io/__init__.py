"""Documents, instance generation, experiment runner and command line."""

from .documents import (
    DocumentError,
    ExperimentPlan,
    TopologyDocument,
    bundled_path,
    dump_topology,
    load_demands,
    load_plan,
    load_topology,
    load_topology_document,
)
from .generate import InstanceSpec, gen_random_instance

__all__ = [
    "DocumentError",
    "ExperimentPlan",
    "InstanceSpec",
    "TopologyDocument",
    "bundled_path",
    "dump_topology",
    "gen_random_instance",
    "load_demands",
    "load_plan",
    "load_topology",
    "load_topology_document",
]
