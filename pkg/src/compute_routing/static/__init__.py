"""Exact formulations for static compute-aware routing."""

from .common import (
    FormulationOptions,
    SplitSolution,
    WalkSolution,
    diagnose_infeasibility,
    evaluate_delay,
)
from .mip import decompose_to_one_stop, mip_size, solve_mip_k, solve_mip_rinp, split_demand
from .segment import (
    ChainError,
    evaluate_with_scaling,
    greedy_alloc_baseline,
    greedy_allocation,
    solve_sr_infinite,
)
from .walks import DisconnectedWalkError, extract_walks, walk_counts, walk_nodes

__all__ = [
    "ChainError",
    "DisconnectedWalkError",
    "FormulationOptions",
    "SplitSolution",
    "WalkSolution",
    "decompose_to_one_stop",
    "diagnose_infeasibility",
    "evaluate_delay",
    "evaluate_with_scaling",
    "extract_walks",
    "greedy_alloc_baseline",
    "greedy_allocation",
    "mip_size",
    "solve_mip_k",
    "solve_mip_rinp",
    "solve_sr_infinite",
    "split_demand",
    "walk_counts",
    "walk_nodes",
]
