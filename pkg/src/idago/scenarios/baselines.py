"""Four-way comparison over a rate sweep: three exact MILP variants and the rounding pipeline."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import IdagoError
from ..formulation import FormulationOptions, build, flow_matrix, realize
from ..lpsolve import SolveBudget, Status, solve_milp
from ..rounding import IdagoResult, capacity_relaxation, idago
from ..servicegraph import ServiceGraph
from ..transform import ServiceForest, dag_to_forest
from .config import ScenarioConfig

METHODS = ("InfoUnawareDAG", "InfoAwareDAG", "InfoAwareForest", "IDAGO")
CSV_HEADER = ("method", "scale", "cost", "car", "crf", "max_latency_relax", "status", "elapsed_s")


@dataclass
class BaselineRow:
    method: str
    scale: float
    cost: float = math.nan
    car: float = math.nan
    crf: float = math.nan
    max_latency_relax: float = math.nan
    status: str = ""
    elapsed_s: float = 0.0
    latencies: dict = field(default_factory=dict)  # original destination commodity -> cumulative latency
    gap: float | None = None
    iterations: int = 0
    nodes: int = 0
    result: object = field(default=None, repr=False)


@dataclass
class BaselineReport:
    scenario: str
    rows: list[BaselineRow]

    def row(self, method: str, scale: float) -> BaselineRow:
        for r in self.rows:
            if r.method == method and r.scale == scale:
                return r
        raise KeyError((method, scale))

    def to_csv(self, timings: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        order = {m: i for i, m in enumerate(METHODS)}
        for r in sorted(self.rows, key=lambda r: (r.scale, order.get(r.method, 99))):
            w.writerow([r.method, fmt(r.scale), fmt(r.cost), fmt(r.car), fmt(r.crf), fmt(r.max_latency_relax),
                        r.status, fmt(r.elapsed_s) if timings else ""])
        return buf.getvalue()


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return format(float(v), ".9g")


def _latencies(s: ServiceGraph, l_cum: np.ndarray, ids: list[str], origin=None) -> dict:
    out = {}
    for i, k in enumerate(ids):
        if s.is_destination_commodity(k):
            out[origin.get(k, k) if origin else k] = float(l_cum[i])
    return out


def _relax(s: ServiceGraph, lat: dict) -> float:
    vals = []
    for kid, l in lat.items():
        b = s.commodity(kid).latency_bound
        if b is not None:
            vals.append(l / b if b > 0 else (math.inf if l > 0 else 0.0))
    return max(vals, default=0.0)


def solve_variant(g, s: ServiceGraph, opts: FormulationOptions, budget: SolveBudget, method: str, scale: float,
                  forest: ServiceForest | None = None) -> BaselineRow:
    t0 = time.monotonic()
    row = BaselineRow(method, scale)
    try:
        target = forest.service if forest is not None else s
        p = build(g, target, opts)
        sol = solve_milp(p, budget)
    except IdagoError as exc:
        row.status = exc.reason
        row.elapsed_s = time.monotonic() - t0
        return row
    row.status = sol.status.value
    row.iterations, row.nodes, row.gap = sol.stats.iterations, sol.stats.nodes, sol.stats.gap
    if sol.x is not None:
        ctx = p.context
        r = realize(ctx, np.rint(flow_matrix(p, sol.x)))
        row.cost = sol.objective
        row.crf = capacity_relaxation(g, r["mu"])
        ids = [k.id for k in ctx.s.commodities]
        origin = forest.commodity_origin if forest is not None else None
        row.latencies = _latencies(ctx.s, r["l_cum"], ids, origin)
        row.max_latency_relax = _relax(s, row.latencies)
        row.result = sol
    row.elapsed_s = time.monotonic() - t0
    return row


def run_idago(g, s: ServiceGraph, cfg: ScenarioConfig, budget: SolveBudget, scale: float,
              forest: ServiceForest) -> BaselineRow:
    t0 = time.monotonic()
    row = BaselineRow("IDAGO", scale)
    try:
        res: IdagoResult = idago(g, s, cfg.rounding, cfg.opts, budget, forest=forest)
    except IdagoError as exc:
        row.status = exc.reason
        row.elapsed_s = time.monotonic() - t0
        return row
    fe = res.best
    row.cost, row.crf = fe.cost, fe.crf
    ids = [k.id for k in fe.context.s.commodities]
    row.latencies = _latencies(fe.context.s, fe.l_cum, ids, forest.commodity_origin)
    row.max_latency_relax = _relax(s, row.latencies)
    row.status = "Accepted" if res.accepted else "NoAcceptableEmbedding"
    row.result = res
    row.elapsed_s = time.monotonic() - t0
    return row


def run_baselines(cfg: ScenarioConfig, budget: SolveBudget | None = None, scales=None,
                  methods=METHODS) -> BaselineReport:
    budget = budget or cfg.budget
    rows: list[BaselineRow] = []
    for scale in (scales if scales is not None else cfg.sweep.scales):
        s = cfg.service_at(scale)
        forest = dag_to_forest(s)
        cell: dict[str, BaselineRow] = {}
        if "InfoUnawareDAG" in methods:
            cell["InfoUnawareDAG"] = solve_variant(cfg.graph, s, replace(cfg.opts, info_aware=False), budget,
                                                   "InfoUnawareDAG", scale)
        if "InfoAwareDAG" in methods:
            cell["InfoAwareDAG"] = solve_variant(cfg.graph, s, cfg.opts, budget, "InfoAwareDAG", scale)
        if "InfoAwareForest" in methods or "IDAGO" in methods:
            cell["InfoAwareForest"] = solve_variant(cfg.graph, s, cfg.opts, budget, "InfoAwareForest", scale, forest)
        if "IDAGO" in methods:
            cell["IDAGO"] = run_idago(cfg.graph, s, cfg, budget, scale, forest)
        ref = cell.get("InfoAwareForest")
        for m in METHODS:
            if m not in cell or (m == "InfoAwareForest" and m not in methods):
                continue
            r = cell[m]
            if ref is not None and ref.cost > 0 and not math.isnan(r.cost):
                r.car = r.cost / ref.cost
            rows.append(r)
    return BaselineReport(cfg.name, rows)
