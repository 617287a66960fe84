"""Bounded-variable revised primal simplex with an explicit dense basis inverse.

Rows are turned into equalities with one slack per row (``A x + s = b``), the
slack bounds encoding the row sense.  Rows whose residual cannot be absorbed
by their slack at the starting point get an artificial column; phase 1
minimises the artificial sum.  Pricing is Dantzig's rule; after ``10 m``
consecutive pivots without objective progress the solver switches to Bland's
rule until progress resumes.  The leaving row is chosen with Harris' two-pass
ratio test.  The inverse is refreshed from scratch every ``refactor_every``
pivots.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger

OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT = "Optimal", "Infeasible", "Unbounded", "BudgetExceeded"

_AT_LO, _AT_HI, _FREE, _FIXED, _BASIC = 1, 2, 3, 4, 0


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray | None
    objective: float
    duals: np.ndarray | None
    reduced_costs: np.ndarray | None
    iterations: int


class _Simplex:
    def __init__(self, A: sp.csc_matrix, senses, b, c, lo, hi, *, max_iter: int, deadline: float | None,
                 feas_tol=1e-9, opt_tol=1e-9, pivot_tol=1e-9, refactor_every=100):
        m, n = A.shape
        self.m, self.n = m, n
        self.A = A
        self.b = np.asarray(b, dtype=float)
        self.feas_tol, self.opt_tol, self.pivot_tol = feas_tol, opt_tol, pivot_tol
        self.refactor_every = refactor_every
        self.max_iter = max_iter
        self.deadline = deadline
        self.iterations = 0

        slo = np.empty(m)
        shi = np.empty(m)
        for i, sense in enumerate(senses):
            if sense == "<=":
                slo[i], shi[i] = 0.0, math.inf
            elif sense == ">=":
                slo[i], shi[i] = -math.inf, 0.0
            else:
                slo[i], shi[i] = 0.0, 0.0
        # starting point for structurals
        xs = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0)).astype(float)
        resid = self.b - A @ xs
        s0 = np.clip(resid, slo, shi)
        need = np.abs(resid - s0) > 0.0
        art_rows = np.nonzero(need)[0]
        self.n_art = len(art_rows)
        self.art_rows = art_rows
        self.art_sign = np.sign(resid[art_rows] - s0[art_rows])
        N = n + m + self.n_art
        self.N = N
        self.L = np.concatenate([lo, slo, np.zeros(self.n_art)]).astype(float)
        self.U = np.concatenate([hi, shi, np.full(self.n_art, math.inf)]).astype(float)
        self.cost2 = np.concatenate([np.asarray(c, float), np.zeros(m + self.n_art)])
        self.cost1 = np.concatenate([np.zeros(n + m), np.ones(self.n_art)])
        self.x = np.concatenate([xs, s0, np.abs(resid[art_rows] - s0[art_rows])])

        self.basis = np.empty(m, dtype=np.int64)
        self.state = np.empty(N, dtype=np.int8)
        for j in range(N):
            self.state[j] = self._nonbasic_state(j)
        art_of_row = {int(r): n + m + t for t, r in enumerate(art_rows)}
        for i in range(m):
            j = art_of_row.get(i, n + i)
            self.basis[i] = j
            self.state[j] = _BASIC
        self.refactor()

    # -- column access -------------------------------------------------------
    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if j < self.n:
            a, z = self.A.indptr[j], self.A.indptr[j + 1]
            return self.A.indices[a:z], self.A.data[a:z]
        if j < self.n + self.m:
            return np.array([j - self.n]), np.array([1.0])
        t = j - self.n - self.m
        return np.array([self.art_rows[t]]), np.array([self.art_sign[t]])

    def _nonbasic_state(self, j: int) -> int:
        lo, hi = self.L[j], self.U[j]
        if lo == hi:
            return _FIXED
        if math.isfinite(lo) and self.x[j] == lo:
            return _AT_LO
        if math.isfinite(hi) and self.x[j] == hi:
            return _AT_HI
        if not math.isfinite(lo) and not math.isfinite(hi):
            return _FREE
        return _AT_LO if math.isfinite(lo) else _AT_HI

    def refactor(self) -> None:
        m = self.m
        B = np.zeros((m, m))
        for i, j in enumerate(self.basis):
            rows, vals = self.column(int(j))
            B[rows, i] = vals
        self.Binv = np.asfortranarray(np.linalg.inv(B)) if m else np.zeros((0, 0), order="F")
        # recompute basic values from nonbasic ones
        nb = self.state != _BASIC
        xn = np.where(nb, self.x, 0.0)
        r = self.b - self.A @ xn[: self.n] - xn[self.n: self.n + self.m]
        if self.n_art:
            np.subtract.at(r, self.art_rows, self.art_sign * xn[self.n + self.m:])
        self.x[self.basis] = self.Binv @ r

    def reduced_costs(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = cost.copy()
        d[: self.n] -= self.A.T @ y
        d[self.n: self.n + self.m] -= y
        if self.n_art:
            d[self.n + self.m:] -= self.art_sign * y[self.art_rows]
        return d

    def run(self, cost: np.ndarray) -> str:
        m = self.m
        stall = 0
        bland = False
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                return LIMIT
            if self.deadline is not None and self.iterations % 25 == 0 and time.monotonic() > self.deadline:
                return LIMIT
            y = cost[self.basis] @ self.Binv if m else np.zeros(0)
            d = self.reduced_costs(cost, y)
            st = self.state
            inc = ((st == _AT_LO) | (st == _FREE)) & (d < -self.opt_tol)
            dec = ((st == _AT_HI) | (st == _FREE)) & (d > self.opt_tol)
            elig = inc | dec
            if not elig.any():
                return OPTIMAL
            if bland:
                q = int(np.argmax(elig))
            else:
                score = np.where(elig, np.abs(d), -1.0)
                q = int(np.argmax(score))
            sigma = 1.0 if inc[q] else -1.0
            rows, vals = self.column(q)
            alpha = self.Binv[:, rows] @ vals if m else np.zeros(0)
            # basic i moves at rate -sigma*alpha_i per unit step
            rate = -sigma * alpha
            xb = self.x[self.basis]
            lb = self.L[self.basis]
            ub = self.U[self.basis]
            big = np.abs(alpha) > self.pivot_tol
            down = big & (rate < 0) & np.isfinite(lb)
            up = big & (rate > 0) & np.isfinite(ub)
            tol = self.feas_tol
            t_relaxed = np.full(m, math.inf)
            t_relaxed[down] = (xb[down] - lb[down] + tol) / (-rate[down])
            t_relaxed[up] = (ub[up] - xb[up] + tol) / rate[up]
            t_max = t_relaxed.min() if m else math.inf
            flip = self.U[q] - self.L[q]
            if flip <= t_max and math.isfinite(flip):
                step = flip
                self.x[self.basis] = xb + step * rate
                self.x[q] = self.U[q] if sigma > 0 else self.L[q]
                st[q] = _AT_HI if sigma > 0 else _AT_LO
                leave = -1
            elif not math.isfinite(t_max):
                return UNBOUNDED
            else:
                t_exact = np.full(m, math.inf)
                t_exact[down] = np.maximum(xb[down] - lb[down], 0.0) / (-rate[down])
                t_exact[up] = np.maximum(ub[up] - xb[up], 0.0) / rate[up]
                cand = np.nonzero(t_exact <= t_max)[0]
                if bland:
                    tmin = t_exact[cand].min()
                    ties = cand[t_exact[cand] <= tmin + 1e-12]
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(cand[np.argmax(np.abs(alpha[cand]))])
                step = t_exact[r]
                leaving = int(self.basis[r])
                hit_lo = rate[r] < 0
                self.x[self.basis] = xb + step * rate
                self.x[q] = self.x[q] + sigma * step
                self.x[leaving] = lb[r] if hit_lo else ub[r]
                st[leaving] = _FIXED if self.L[leaving] == self.U[leaving] else (_AT_LO if hit_lo else _AT_HI)
                self.basis[r] = q
                st[q] = _BASIC
                self._pivot(r, alpha)
                leave = r
                since_refactor += 1
            self.iterations += 1
            if step * abs(d[q]) <= 1e-12:
                stall += 1
                if stall >= 10 * max(m, 1):
                    bland = True
            else:
                stall = 0
                bland = False
            if leave >= 0 and since_refactor >= self.refactor_every:
                self.refactor()
                since_refactor = 0

    def _pivot(self, r: int, alpha: np.ndarray) -> None:
        piv = alpha[r]
        row_r = self.Binv[r, :].copy()
        w = alpha.copy()
        w[r] -= piv  # so the rank-1 update leaves row r scaled correctly below
        # Binv <- Binv - (w / piv) outer row_r, then row r /= piv
        self.Binv = dger(-1.0 / piv, w, row_r, a=self.Binv, overwrite_a=True)
        self.Binv[r, :] = row_r / piv

    def objective(self, cost) -> float:
        return float(cost @ self.x)


def solve(A, senses, b, c, lo, hi, *, max_iter: int = 10**7, deadline: float | None = None) -> SimplexResult:
    """Minimise ``c x`` subject to ``A x (senses) b`` and ``lo <= x <= hi``."""
    A = sp.csc_matrix(A, dtype=float)
    m, n = A.shape
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if np.any(lo > hi):
        return SimplexResult(INFEASIBLE, None, math.nan, None, None, 0)
    sx = _Simplex(A, senses, b, c, lo, hi, max_iter=max_iter, deadline=deadline)
    if sx.n_art:
        status = sx.run(sx.cost1)
        if status == LIMIT:
            return SimplexResult(LIMIT, None, math.nan, None, None, sx.iterations)
        sx.refactor()
        infeas = float(sx.x[sx.n + sx.m:].sum())
        scale = max(1.0, float(np.abs(sx.b).max(initial=0.0)))
        if infeas > 1e-7 * scale:
            return SimplexResult(INFEASIBLE, None, math.nan, None, None, sx.iterations)
        # artificials are pinned at zero for phase 2
        art = np.arange(sx.n + sx.m, sx.N)
        sx.L[art] = 0.0
        sx.U[art] = 0.0
        nb = art[sx.state[art] != _BASIC]
        sx.x[nb] = 0.0
        sx.state[nb] = _FIXED
    status = sx.run(sx.cost2)
    if status == UNBOUNDED:
        return SimplexResult(UNBOUNDED, None, -math.inf, None, None, sx.iterations)
    if status == LIMIT:
        return SimplexResult(LIMIT, sx.x[:n].copy(), sx.objective(sx.cost2), None, None, sx.iterations)
    sx.refactor()
    y = sx.cost2[sx.basis] @ sx.Binv if m else np.zeros(0)
    d = sx.reduced_costs(sx.cost2, y)
    x = sx.x[:n].copy()
    # snap values that drifted within tolerance of a bound
    for arr_lo, arr_hi in ((lo, hi),):
        near_lo = np.isfinite(arr_lo) & (np.abs(x - arr_lo) <= 1e-11)
        near_hi = np.isfinite(arr_hi) & (np.abs(x - arr_hi) <= 1e-11)
        x[near_lo] = arr_lo[near_lo]
        x[near_hi] = arr_hi[near_hi]
    return SimplexResult(OPTIMAL, x, float(np.asarray(c, float) @ x), y, d[:n], sx.iterations)
