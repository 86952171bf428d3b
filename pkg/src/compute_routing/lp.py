"""Linear and mixed-integer program container backed by HiGHS.

Every static formulation is assembled into a :class:`LinearProgram`: named
variables with bounds and integrality flags, sparse rows with a relation and
a right-hand side, and a linear objective. :func:`solve_lp` and
:func:`solve_mip` hand the model to scipy's HiGHS interface and translate the
result into an :class:`LpSolution` whose dual values are sensitivities of the
reported objective to each row's right-hand side.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

FEAS_TOL = 1e-9
INT_TOL = 1e-6
MIP_GAP = 1e-6
MAX_VARIABLES = 10_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"
NODE_LIMIT = "node-limit"


class SizeLimitError(RuntimeError):
    """The model exceeds the desk-scale size this solver accepts."""


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    lower_duals: np.ndarray | None = None
    upper_duals: np.ndarray | None = None
    gap: float | None = None
    bound: float | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def value(self, index) -> np.ndarray | float:
        return self.x[index]


@dataclass
class LinearProgram:
    """Sparse LP/MIP model with named variables.

    Rows are stored as coordinate triplets; relations are ``"<="``, ``"=="``
    or ``">="``.
    """

    sense: str = "min"
    name: str = ""
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    names: dict[str, int] = field(default_factory=dict)
    var_names: list[str] = field(default_factory=list)
    _rows: list[int] = field(default_factory=list)
    _cols: list[int] = field(default_factory=list)
    _vals: list[float] = field(default_factory=list)
    relations: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    @property
    def num_variables(self) -> int:
        return len(self.lb)

    @property
    def num_constraints(self) -> int:
        return len(self.rhs)

    @property
    def is_mip(self) -> bool:
        return any(self.integer)

    def add_variable(
        self,
        name: str | None = None,
        lb: float = 0.0,
        ub: float = math.inf,
        integer: bool = False,
        cost: float = 0.0,
    ) -> int:
        idx = len(self.lb)
        name = name if name is not None else f"v{idx}"
        if name in self.names:
            raise ValueError(f"duplicate variable name {name!r}")
        self.names[name] = idx
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self.cost.append(float(cost))
        return idx

    def add_variables(self, prefix: str, keys: Iterable, **kwargs) -> dict:
        """Add one variable per key, named ``prefix[key]``; returns key -> index."""
        return {k: self.add_variable(f"{prefix}[{k}]", **kwargs) for k in keys}

    def index(self, name: str) -> int:
        return self.names[name]

    def set_cost(self, index: int, value: float):
        self.cost[index] = float(value)

    def add_constraint(
        self,
        coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
        relation: str,
        rhs: float,
        name: str | None = None,
    ) -> int:
        if relation not in ("<=", "==", ">="):
            raise ValueError(f"bad relation {relation!r}")
        row = len(self.rhs)
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        n = self.num_variables
        for col, val in items:
            if not 0 <= col < n:
                raise IndexError(f"constraint references unknown variable {col}")
            if val != 0:
                self._rows.append(row)
                self._cols.append(int(col))
                self._vals.append(float(val))
        self.relations.append(relation)
        self.rhs.append(float(rhs))
        self.row_names.append(name if name is not None else f"c{row}")
        return row

    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self._vals, (self._rows, self._cols)),
            shape=(self.num_constraints, self.num_variables),
        )

    def relaxed(self) -> "LinearProgram":
        """Copy with every integrality flag cleared."""
        lp = copy.deepcopy(self)
        lp.integer = [False] * self.num_variables
        return lp

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ x

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        viol = [0.0]
        viol.append(float(np.max(np.asarray(self.lb) - x, initial=0.0)))
        viol.append(float(np.max(x - np.asarray(self.ub), initial=0.0)))
        act = self.row_activity(x) if self.num_constraints else np.zeros(0)
        for a, rel, b in zip(act, self.relations, self.rhs):
            if rel == "<=":
                viol.append(a - b)
            elif rel == ">=":
                viol.append(b - a)
            else:
                viol.append(abs(a - b))
        return max(viol)

    def to_lp_format(self) -> str:
        """Render the model in CPLEX LP text format for external cross-checks."""

        def term_list(pairs):
            parts = []
            for col, val in pairs:
                sign = "-" if val < 0 else "+"
                parts.append(f"{sign} {abs(val):.17g} {self.var_names[col]}")
            text = " ".join(parts) or "0"
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ {self.name}" if self.name else "\\ model"]
        lines.append("Minimize" if self.sense == "min" else "Maximize")
        lines.append(" obj: " + term_list((j, c) for j, c in enumerate(self.cost) if c))
        lines.append("Subject To")
        mat = self.matrix().tocsr()
        rel_text = {"<=": "<=", ">=": ">=", "==": "="}
        for i in range(self.num_constraints):
            start, end = mat.indptr[i], mat.indptr[i + 1]
            pairs = zip(mat.indices[start:end], mat.data[start:end])
            lines.append(
                f" {self.row_names[i]}: {term_list(pairs)} {rel_text[self.relations[i]]} {self.rhs[i]:.17g}"
            )
        lines.append("Bounds")
        for j, name in enumerate(self.var_names):
            lo = "-inf" if math.isinf(self.lb[j]) else f"{self.lb[j]:.17g}"
            hi = "+inf" if math.isinf(self.ub[j]) else f"{self.ub[j]:.17g}"
            lines.append(f" {lo} <= {name} <= {hi}")
        ints = [n for n, flag in zip(self.var_names, self.integer) if flag]
        if ints:
            lines.append("General")
            lines.extend(f" {n}" for n in ints)
        lines.append("End")
        return "\n".join(lines) + "\n"


def _check_size(lp: LinearProgram):
    if lp.num_variables > MAX_VARIABLES:
        raise SizeLimitError(
            f"model {lp.name!r} has {lp.num_variables} variables; "
            f"the desk-scale limit is {MAX_VARIABLES}"
        )


def _split_rows(lp: LinearProgram):
    """Return (A_ub, b_ub, A_eq, b_eq, ub_rows, ub_sign, eq_rows)."""
    mat = lp.matrix().tocsr()
    rel = np.array(lp.relations)
    rhs = np.array(lp.rhs, dtype=float)
    le = np.flatnonzero(rel == "<=")
    ge = np.flatnonzero(rel == ">=")
    eq = np.flatnonzero(rel == "==")
    ub_rows = np.concatenate([le, ge])
    sign = np.concatenate([np.ones(len(le)), -np.ones(len(ge))])
    a_ub = sparse.diags(sign) @ mat[ub_rows] if len(ub_rows) else None
    b_ub = sign * rhs[ub_rows] if len(ub_rows) else None
    a_eq = mat[eq] if len(eq) else None
    b_eq = rhs[eq] if len(eq) else None
    return a_ub, b_ub, a_eq, b_eq, ub_rows, sign, eq


def solve_lp(lp: LinearProgram, max_iterations: int | None = None) -> LpSolution:
    """Solve a pure LP with the dual simplex; returns primal values and duals."""
    if lp.is_mip:
        raise ValueError("solve_lp received integrality flags; use solve_mip")
    _check_size(lp)
    flip = -1.0 if lp.sense == "max" else 1.0
    c = flip * np.asarray(lp.cost, dtype=float)
    a_ub, b_ub, a_eq, b_eq, ub_rows, sign, eq_rows = _split_rows(lp)
    bounds = np.column_stack([lp.lb, lp.ub]) if lp.num_variables else None
    options = {"presolve": True}
    if max_iterations is not None:
        options["maxiter"] = max_iterations
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
        bounds=bounds, method="highs-ds", options=options,
    )
    if res.status == 2:
        return LpSolution(INFEASIBLE, message=res.message)
    if res.status == 3:
        return LpSolution(UNBOUNDED, message=res.message)
    if res.status == 1:
        x = None if res.x is None else np.asarray(res.x)
        obj = math.nan if res.x is None else flip * res.fun
        return LpSolution(ITERATION_LIMIT, x, obj, message=res.message)
    if res.status != 0:
        return LpSolution(INFEASIBLE, message=res.message)
    duals = np.zeros(lp.num_constraints)
    if len(ub_rows):
        duals[ub_rows] = flip * sign * res.ineqlin.marginals
    if len(eq_rows):
        duals[eq_rows] = flip * res.eqlin.marginals
    return LpSolution(
        OPTIMAL,
        np.asarray(res.x),
        float(flip * res.fun),
        duals,
        flip * np.asarray(res.lower.marginals),
        flip * np.asarray(res.upper.marginals),
        gap=0.0,
        bound=float(flip * res.fun),
        message=res.message,
    )


def dual_objective(lp: LinearProgram, sol: LpSolution) -> float:
    """Objective of the dual solution carried by ``sol`` (finite bounds only)."""
    total = float(np.dot(lp.rhs, sol.duals))
    for j in range(lp.num_variables):
        if sol.lower_duals[j] and math.isfinite(lp.lb[j]):
            total += sol.lower_duals[j] * lp.lb[j]
        if sol.upper_duals[j] and math.isfinite(lp.ub[j]):
            total += sol.upper_duals[j] * lp.ub[j]
    return total


def solve_mip(
    lp: LinearProgram,
    gap_tol: float = MIP_GAP,
    time_limit: float | None = None,
    node_limit: int | None = None,
) -> LpSolution:
    """Branch-and-bound solve of a model with integrality flags.

    Returns ``node-limit`` status (with incumbent and bound, when one exists)
    if a time or node budget stops the search early.
    """
    if not lp.is_mip:
        return solve_lp(lp)
    _check_size(lp)
    flip = -1.0 if lp.sense == "max" else 1.0
    c = flip * np.asarray(lp.cost, dtype=float)
    constraints = []
    if lp.num_constraints:
        rel = np.array(lp.relations)
        rhs = np.array(lp.rhs, dtype=float)
        lo = np.where(rel == "<=", -np.inf, rhs)
        hi = np.where(rel == ">=", np.inf, rhs)
        constraints.append(LinearConstraint(lp.matrix(), lo, hi))
    options = {"mip_rel_gap": gap_tol, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    if node_limit is not None:
        options["node_limit"] = node_limit
    res = milp(
        c,
        integrality=np.asarray(lp.integer, dtype=int),
        bounds=Bounds(np.asarray(lp.lb), np.asarray(lp.ub)),
        constraints=constraints,
        options=options,
    )
    bound = getattr(res, "mip_dual_bound", None)
    bound = None if bound is None else float(flip * bound)
    gap = getattr(res, "mip_gap", None)
    if res.status == 0:
        x = np.asarray(res.x)
        x[np.asarray(lp.integer)] = np.round(x[np.asarray(lp.integer)])
        return LpSolution(OPTIMAL, x, float(flip * res.fun), gap=gap, bound=bound,
                          message=res.message)
    if res.status == 1:
        x = None if res.x is None else np.asarray(res.x)
        obj = math.nan if res.x is None else float(flip * res.fun)
        return LpSolution(NODE_LIMIT, x, obj, gap=gap, bound=bound, message=res.message)
    if res.status == 3:
        return LpSolution(UNBOUNDED, message=res.message)
    return LpSolution(INFEASIBLE, message=res.message)


def solve(lp: LinearProgram, **kwargs) -> LpSolution:
    """Dispatch to :func:`solve_mip` or :func:`solve_lp` by integrality."""
    return solve_mip(lp, **kwargs) if lp.is_mip else solve_lp(lp)
