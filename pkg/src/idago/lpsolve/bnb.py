"""Best-bound branch-and-bound on top of the native simplex."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from . import simplex

INT_TOL = 1e-6
PRUNE_TOL = 1e-9


@dataclass
class BnbResult:
    status: str
    x: np.ndarray | None
    objective: float
    bound: float
    nodes: int
    iterations: int


def branch_and_bound(A, senses, b, c, lo, hi, integer, *, max_nodes: int, max_iter: int,
                     deadline: float | None) -> BnbResult:
    integer = np.asarray(integer, bool)
    int_cols = np.nonzero(integer)[0]
    lo0 = np.asarray(lo, float).copy()
    hi0 = np.asarray(hi, float).copy()
    # integer bounds can be tightened to integers up front
    lo0[int_cols] = np.ceil(lo0[int_cols] - INT_TOL)
    hi0[int_cols] = np.floor(hi0[int_cols] + INT_TOL)
    iters = 0
    nodes = 0
    counter = 0

    def cutoff() -> float:
        if not math.isfinite(inc_obj):
            return math.inf
        return inc_obj - PRUNE_TOL * max(1.0, abs(inc_obj))

    def relax(lo_, hi_):
        nonlocal iters
        left = max(max_iter - iters, 1)
        r = simplex.solve(A, senses, b, c, lo_, hi_, max_iter=left, deadline=deadline)
        iters += r.iterations
        return r

    root = relax(lo0, hi0)
    nodes = 1
    if root.status == simplex.INFEASIBLE:
        return BnbResult(simplex.INFEASIBLE, None, math.nan, math.nan, nodes, iters)
    if root.status == simplex.UNBOUNDED:
        return BnbResult(simplex.UNBOUNDED, None, -math.inf, -math.inf, nodes, iters)
    if root.status == simplex.LIMIT:
        return BnbResult(simplex.LIMIT, None, math.nan, -math.inf, nodes, iters)

    incumbent: np.ndarray | None = None
    inc_obj = math.inf
    heap: list = [(root.objective, counter, lo0, hi0, root.x)]
    exhausted = False
    while heap:
        bound, _, nlo, nhi, x = heapq.heappop(heap)
        if bound >= cutoff():
            continue
        frac = np.abs(x[int_cols] - np.round(x[int_cols]))
        if frac.size == 0 or frac.max() <= INT_TOL:
            xi = x.copy()
            xi[int_cols] = np.round(xi[int_cols])
            incumbent, inc_obj = xi, float(np.asarray(c) @ xi)
            continue
        if nodes >= max_nodes or iters >= max_iter or (deadline is not None and time.monotonic() > deadline):
            heapq.heappush(heap, (bound, counter, nlo, nhi, x))
            exhausted = True
            break
        # most fractional, lowest column on ties (argmax returns the first)
        score = np.abs(frac - 0.5)
        j = int(int_cols[int(np.argmin(score))])
        v = x[j]
        for child_lo, child_hi in ((None, math.floor(v)), (math.ceil(v), None)):
            clo, chi = nlo.copy(), nhi.copy()
            if child_hi is not None:
                chi[j] = child_hi
            else:
                clo[j] = child_lo
            if clo[j] > chi[j]:
                continue
            r = relax(clo, chi)
            nodes += 1
            if r.status == simplex.OPTIMAL and r.objective < cutoff():
                counter += 1
                heapq.heappush(heap, (r.objective, counter, clo, chi, r.x))
            elif r.status == simplex.LIMIT:
                exhausted = True
    if exhausted or (heap and deadline is not None and time.monotonic() > deadline):
        best_bound = min([h[0] for h in heap], default=inc_obj)
        return BnbResult(simplex.LIMIT, incumbent, inc_obj, min(best_bound, inc_obj), nodes, iters)
    if incumbent is None:
        return BnbResult(simplex.INFEASIBLE, None, math.nan, math.nan, nodes, iters)
    return BnbResult(simplex.OPTIMAL, incumbent, inc_obj, inc_obj, nodes, iters)
