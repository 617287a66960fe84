from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..formulation import LpProblem
from . import bnb, highs, simplex

FEAS_TOL = 1e-7
INT_TOL = 1e-6


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    BUDGET_EXCEEDED = "BudgetExceeded"


@dataclass(frozen=True)
class SolveBudget:
    """Solver limits.  ``backend`` is ``native``, ``highs`` or ``auto``.

    ``auto`` keeps the native simplex for problems small enough for a dense
    basis inverse and hands larger ones to HiGHS.
    """

    max_simplex_iterations: int = 2_000_000
    max_bnb_nodes: int = 200_000
    wall_clock_limit: float = 600.0
    backend: str = "auto"
    native_lp_rows: int = 1500
    native_milp_rows: int = 250

    def __post_init__(self):
        if self.max_simplex_iterations <= 0 or self.max_bnb_nodes <= 0 or self.wall_clock_limit <= 0:
            raise ValueError("solve budget entries must be positive")
        if self.backend not in ("auto", "native", "highs"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class SolveStats:
    iterations: int = 0
    nodes: int = 0
    elapsed: float = 0.0
    backend: str = ""
    gap: float | None = None
    bound: float | None = None


@dataclass
class LpSolution:
    status: Status
    objective: float
    x: np.ndarray | None
    problem: LpProblem = field(repr=False)
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def __getitem__(self, key) -> float:
        return float(self.x[self.problem.index(key)])

    def value(self, key) -> float:
        return self[key]

    @property
    def values(self) -> dict:
        if self.x is None:
            return {}
        return {k: float(v) for k, v in zip(self.problem.variables, self.x)}

    @property
    def dual_hint(self) -> np.ndarray | None:
        return self.duals

    def dual_objective(self) -> float:
        """Objective of the dual certificate ``y b + sum d_j x_j`` (nonbasic at bounds)."""
        p = self.problem
        y = self.duals
        d = self.reduced_costs
        total = float(y @ p.rhs()) if len(y) else 0.0
        for j in np.nonzero(np.abs(d) > 1e-12)[0]:
            if d[j] > 0:
                total += d[j] * p.lo[j]
            else:
                total += d[j] * p.hi[j]
        return total


def _choose_backend(budget: SolveBudget, p: LpProblem, milp_: bool) -> str:
    if budget.backend != "auto":
        return budget.backend
    limit = budget.native_milp_rows if milp_ else budget.native_lp_rows
    return "native" if p.n_rows <= limit else "highs"


def _clean(x: np.ndarray, p: LpProblem) -> np.ndarray:
    x = np.clip(x, p.lo, p.hi)
    x[np.abs(x) < 1e-12] = 0.0
    return x


def solve_lp(p: LpProblem, budget: SolveBudget = SolveBudget()) -> LpSolution:
    """Solve the continuous relaxation of ``p`` (integrality is ignored)."""
    t0 = time.monotonic()
    A, senses, b = p.matrix(), p.senses(), p.rhs()
    backend = _choose_backend(budget, p, False)
    deadline = t0 + budget.wall_clock_limit
    if backend == "native":
        r = simplex.solve(A, senses, b, p.c, p.lo, p.hi, max_iter=budget.max_simplex_iterations, deadline=deadline)
        status, x, obj, duals, iters = r.status, r.x, r.objective, r.duals, r.iterations
        rc = r.reduced_costs
    else:
        status, x, obj, duals, iters = highs.solve_lp(A, senses, b, p.c, p.lo, p.hi,
                                                      time_limit=budget.wall_clock_limit,
                                                      max_iter=budget.max_simplex_iterations)
        rc = (p.c - A.T @ duals) if duals is not None else None
    stats = SolveStats(iterations=iters, elapsed=time.monotonic() - t0, backend=backend)
    if x is not None and status == "Optimal":
        x = _clean(x, p)
        obj = p.objective_value(x)
    return LpSolution(Status(status), obj, x if status in ("Optimal", "BudgetExceeded") else None, p, duals, rc, stats)


def solve_milp(p: LpProblem, budget: SolveBudget = SolveBudget()) -> LpSolution:
    t0 = time.monotonic()
    if not p.integer.any():
        return solve_lp(p, budget)
    A, senses, b = p.matrix(), p.senses(), p.rhs()
    backend = _choose_backend(budget, p, True)
    deadline = t0 + budget.wall_clock_limit
    if backend == "native":
        r = bnb.branch_and_bound(A, senses, b, p.c, p.lo, p.hi, p.integer, max_nodes=budget.max_bnb_nodes,
                                 max_iter=budget.max_simplex_iterations, deadline=deadline)
        status, x, obj, bound, nodes, iters = r.status, r.x, r.objective, r.bound, r.nodes, r.iterations
    else:
        status, x, obj, bound, nodes = highs.solve_milp(A, senses, b, p.c, p.lo, p.hi, p.integer,
                                                        time_limit=budget.wall_clock_limit,
                                                        max_nodes=budget.max_bnb_nodes)
        iters = 0
    if x is not None:
        x = _clean(x, p)
        x[p.integer] = np.round(x[p.integer])
        obj = p.objective_value(x)
    gap = None
    if status == "BudgetExceeded" and x is not None and bound is not None and math.isfinite(bound):
        gap = (obj - bound) / max(abs(obj), 1e-12)
    elif status == "Optimal":
        gap = 0.0
    stats = SolveStats(iterations=iters, nodes=nodes, elapsed=time.monotonic() - t0, backend=backend, gap=gap,
                       bound=bound)
    return LpSolution(Status(status), obj if x is not None else math.nan, x, p, None, None, stats)
