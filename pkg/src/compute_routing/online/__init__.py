"""Online admission of dynamic demands with processing requirements."""

from .router import (
    SAFE,
    SHORTEST,
    VIOLATING,
    Decision,
    DualState,
    OfflineResult,
    OnlineMetrics,
    admit,
    candidate_sets,
    dual_feasibility_gap,
    dual_objective,
    offline_optimum,
    prepare,
    run_simulation,
    simulate,
    violation_bound,
)
from .splitgraph import (
    CandidatePath,
    SplitGraph,
    SplitLink,
    generate_candidate_paths,
    split_compute_nodes,
)
from .trace import ScenarioConfig, apply_capacities, generate_trace, read_trace, write_trace

__all__ = [
    "SAFE",
    "SHORTEST",
    "VIOLATING",
    "CandidatePath",
    "Decision",
    "DualState",
    "OfflineResult",
    "OnlineMetrics",
    "ScenarioConfig",
    "SplitGraph",
    "SplitLink",
    "admit",
    "candidate_sets",
    "apply_capacities",
    "dual_feasibility_gap",
    "dual_objective",
    "generate_candidate_paths",
    "generate_trace",
    "offline_optimum",
    "prepare",
    "read_trace",
    "run_simulation",
    "simulate",
    "split_compute_nodes",
    "violation_bound",
    "write_trace",
]
