"""HiGHS (through scipy) as the large-instance backend."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp


def _split(A, senses, b):
    senses = np.asarray(senses)
    lb = np.where(senses == "<=", -np.inf, b)
    ub = np.where(senses == ">=", np.inf, b)
    return lb, ub


def solve_lp(A, senses, b, c, lo, hi, *, time_limit: float | None, max_iter: int):
    senses = np.asarray(senses)
    ub_rows = senses != "="
    A = A.tocsr()
    sign = np.where(senses == ">=", -1.0, 1.0)
    A_ub = A[ub_rows].multiply(sign[ub_rows][:, None]).tocsr() if ub_rows.any() else None
    b_ub = (b * sign)[ub_rows] if ub_rows.any() else None
    eq = ~ub_rows
    A_eq = A[eq] if eq.any() else None
    b_eq = b[eq] if eq.any() else None
    opts = {"presolve": True, "primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}
    if time_limit is not None:
        opts["time_limit"] = max(time_limit, 0.01)
    opts["maxiter"] = int(max_iter)
    bounds = list(zip([None if not math.isfinite(v) else v for v in lo],
                      [None if not math.isfinite(v) else v for v in hi]))
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs-ds", options=opts)
    duals = None
    if res.status == 0:
        duals = np.zeros(len(senses))
        if ub_rows.any():
            duals[ub_rows] = np.asarray(res.ineqlin.marginals) * sign[ub_rows]
        if eq.any():
            duals[eq] = np.asarray(res.eqlin.marginals)
    status = {0: "Optimal", 1: "BudgetExceeded", 2: "Infeasible", 3: "Unbounded"}.get(res.status, "BudgetExceeded")
    x = None if res.x is None else np.asarray(res.x, float)
    iters = int(getattr(res, "nit", 0) or 0)
    return status, x, (float(res.fun) if res.fun is not None else math.nan), duals, iters


def solve_milp(A, senses, b, c, lo, hi, integer, *, time_limit: float | None, max_nodes: int):
    lb, ub = _split(A, np.asarray(senses), b)
    cons = [LinearConstraint(A, lb, ub)] if A.shape[0] else []
    opts = {"presolve": True, "mip_rel_gap": 1e-9, "node_limit": int(max_nodes)}
    if time_limit is not None:
        opts["time_limit"] = max(time_limit, 0.01)
    res = milp(c, integrality=np.asarray(integer, int), bounds=Bounds(lo, hi), constraints=cons, options=opts)
    x = None if res.x is None else np.asarray(res.x, float)
    if res.status == 0:
        status = "Optimal"
    elif res.status == 2:
        status = "Infeasible"
    elif res.status == 3:
        status = "Unbounded"
    else:
        status = "BudgetExceeded" if x is not None or res.status == 1 else "Infeasible"
    obj = float(res.fun) if res.fun is not None and x is not None else math.nan
    bound = getattr(res, "mip_dual_bound", None)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    return status, x, obj, bound, nodes
