"""Randomized rounding: draw one embedding per tree, compose, evaluate, repeat."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .cloudnet import AugmentedGraph, LinkKind
from .decompose import Decomposition, Embedding, canonical_lp, decompose_tree
from .errors import InconsistentEmbedding, LpInfeasible, MissingTreeEmbedding
from .formulation import FormulationOptions, ModelContext, build, cost_of, realize, resolve
from .lpsolve import LpSolution, SolveBudget, solve_lp
from .servicegraph import FunctionKind, ServiceGraph
from .transform import ServiceForest, dag_to_forest

EXHAUSTIVE_LIMIT = 4096


class Selection(str, Enum):
    FIRST_ACCEPTED = "first"
    BEST_COST = "best"  # feasible first, then cheapest
    LOWEST_COST = "lowest"  # cheapest, feasibility ignored


@dataclass(frozen=True)
class RoundingParams:
    seed: int = 0
    max_tries: int = 100
    accept_crf: float = 1.0
    accept_latency_relax: float = 1.0
    selection: Selection = Selection.FIRST_ACCEPTED
    exhaustive_limit: int = EXHAUSTIVE_LIMIT

    def __post_init__(self):
        if self.max_tries <= 0:
            raise ValueError("max_tries must be positive")
        if self.accept_crf < 1.0 or self.accept_latency_relax < 1.0:
            raise ValueError("acceptance thresholds must be >= 1")
        object.__setattr__(self, "selection", Selection(self.selection))


def stream(seed: int, attempt: int, tree: int) -> np.random.Generator:
    """Independent counter-based generator for (seed, try, tree)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & (2**64 - 1), attempt, tree])))


def sample(dec: Decomposition, rng: np.random.Generator) -> int:
    """Index of the entry drawn by inverse CDF over the entry probabilities."""
    probs = dec.probabilities
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(probs) - 1)


@dataclass
class ForestEmbedding:
    chosen: list[Embedding]
    flows: np.ndarray  # |K^T| x |E^a|
    mu_obj: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    l_local: np.ndarray
    l_cum: np.ndarray
    cost: float
    crf: float
    latency_relax: dict  # destination commodity -> cumulative latency / bound
    context: ModelContext = field(repr=False)

    @property
    def max_latency_relax(self) -> float:
        return max(self.latency_relax.values(), default=0.0)

    def latency(self, kid: str) -> float:
        return float(self.l_cum[self.context.k(kid)])


def capacity_relaxation(g: AugmentedGraph, mu: np.ndarray) -> float:
    ratios = []
    for lk in g.links:
        if lk.capacitated:
            if lk.capacity > 0:
                ratios.append(mu[lk.id] / lk.capacity)
            elif mu[lk.id] > 1e-12:
                ratios.append(math.inf)
    return float(max(ratios, default=0.0))


def integral_violations(ctx: ModelContext, flows: np.ndarray) -> list[str]:
    """Conservation, chaining and fixing violations of 0/1 flows (empty when exact)."""
    g, s = ctx.g, ctx.s
    out = []
    if np.any((flows != 0) & (flows != 1)):
        out.append("non-binary flow")
    if np.any(flows < ctx.lo) or np.any(flows > ctx.hi):
        out.append("flow outside fixings")
    for u in g.communication_nodes:
        bal = flows[:, list(g.in_links(u))].sum(axis=1) - flows[:, list(g.out_links(u))].sum(axis=1)
        for k in np.nonzero(bal)[0]:
            out.append(f"conservation of {s.commodities[k].id} at node {u}")
    for ki, spec in enumerate(s.commodities):
        if s.function(spec.producer).kind is FunctionKind.SOURCE:
            continue
        for lid in s.input_commodities(spec.id):
            li = ctx.k(lid)
            for p in ctx.allowed[spec.producer]:
                lin, lout = g.gadget_links(p)
                if flows[ki, lout] != flows[li, lin]:
                    out.append(f"chaining of {spec.id} at node {p}")
    return out


def compose(chosen, forest: ServiceForest, g: AugmentedGraph, opts: FormulationOptions = FormulationOptions(),
            ctx: ModelContext | None = None) -> ForestEmbedding:
    chosen = list(chosen)
    if len(chosen) != forest.M or any(c is None for c in chosen):
        raise MissingTreeEmbedding(f"need {forest.M} tree embeddings, got {sum(c is not None for c in chosen)}")
    if ctx is None:
        ctx = resolve(g, forest.service, opts)
    flows = np.zeros((len(ctx.s.commodities), len(g.links)))
    for comp, emb in zip(forest.components, chosen):
        for kid in comp.commodities:
            if kid not in emb.commodity_map:
                raise MissingTreeEmbedding(f"tree {comp.index} lacks commodity {kid}")
            flows[ctx.k(kid), list(emb.commodity_map[kid])] = 1.0
    bad = integral_violations(ctx, flows)
    if bad:
        raise InconsistentEmbedding("; ".join(bad[:5]))
    r = realize(ctx, flows)
    cost = cost_of(ctx, r["mu"], r["y"])
    relax = {}
    for ki, spec in enumerate(ctx.s.commodities):
        if spec.latency_bound is not None and ctx.s.is_destination_commodity(spec.id):
            relax[spec.id] = r["l_cum"][ki] / spec.latency_bound if spec.latency_bound > 0 else (
                math.inf if r["l_cum"][ki] > 0 else 0.0)
    return ForestEmbedding(chosen, flows, r["mu_obj"], r["mu"], r["y"], r["l_local"], r["l_cum"], cost,
                           capacity_relaxation(g, r["mu"]), relax, ctx)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    attempt: int
    indices: tuple[int, ...]
    cost: float
    crf: float
    max_latency_relax: float
    accepted: bool


@dataclass
class IdagoResult:
    best: ForestEmbedding
    best_candidate: Candidate
    tries_used: int
    lp: LpSolution
    decs: list[Decomposition]
    forest: ServiceForest
    candidates: list[Candidate]
    accepted: bool  # False when no candidate met the thresholds
    exhaustive: bool

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(d.N for d in self.decs)

    def embedding_of(self, cand: Candidate, g: AugmentedGraph) -> ForestEmbedding:
        chosen = [d.entries[i][0] for d, i in zip(self.decs, cand.indices)]
        return compose(chosen, self.forest, g, ctx=self.best.context)


def relaxed_options(opts: FormulationOptions) -> FormulationOptions:
    return replace(opts, relaxed=True)


def solve_forest_lp(g: AugmentedGraph, forest: ServiceForest, opts: FormulationOptions,
                    budget: SolveBudget = SolveBudget()) -> LpSolution:
    p = build(g, forest.service, relaxed_options(opts))
    lp = solve_lp(p, budget)
    if not lp.ok:
        raise LpInfeasible(f"LP relaxation status {lp.status.value}")
    return canonical_lp(lp)


def _accept(fe: ForestEmbedding, params: RoundingParams) -> bool:
    tol = 1e-9
    return fe.crf <= params.accept_crf + tol and fe.max_latency_relax <= params.accept_latency_relax + tol


def _rank(c: Candidate, selection: Selection) -> tuple:
    if selection is Selection.LOWEST_COST:
        return (c.cost, c.attempt)
    return (not c.accepted, c.cost, c.attempt)


def idago(g: AugmentedGraph, s: ServiceGraph, params: RoundingParams = RoundingParams(),
          opts: FormulationOptions = FormulationOptions(), budget: SolveBudget = SolveBudget(),
          forest: ServiceForest | None = None) -> IdagoResult:
    """Run the whole pipeline: forest, LP relaxation, decomposition, rounding."""
    if forest is None:
        forest = dag_to_forest(s)
    lp = solve_forest_lp(g, forest, opts, budget)
    ctx = lp.problem.context
    decs = [decompose_tree(c, lp, g) for c in forest.components]
    sizes = [d.N for d in decs]
    exhaustive = math.prod(sizes) <= params.exhaustive_limit
    if exhaustive:
        draws = itertools.product(*(range(n) for n in sizes))
    else:
        draws = (tuple(sample(d, stream(params.seed, t, phi)) for phi, d in enumerate(decs))
                 for t in range(params.max_tries))
    cache: dict[tuple[int, ...], ForestEmbedding] = {}
    candidates: list[Candidate] = []
    best: Candidate | None = None
    for attempt, idx in enumerate(draws):
        fe = cache.get(idx)
        if fe is None:
            fe = compose([d.entries[i][0] for d, i in zip(decs, idx)], forest, g, ctx=ctx)
            cache[idx] = fe
        cand = Candidate(attempt, idx, fe.cost, fe.crf, fe.max_latency_relax, _accept(fe, params))
        candidates.append(cand)
        if best is None or _rank(cand, params.selection) < _rank(best, params.selection):
            best = cand
        if params.selection is Selection.FIRST_ACCEPTED and cand.accepted:
            best = cand
            break
    if params.selection is Selection.FIRST_ACCEPTED and not best.accepted:
        best = min(candidates, key=lambda c: _rank(c, Selection.BEST_COST))
    return IdagoResult(cache[best.indices], best, len(candidates), lp, decs, forest, candidates, best.accepted,
                       exhaustive)


def best_product_element(result: IdagoResult, g: AugmentedGraph, selection: Selection) -> Candidate:
    """Best element of the full Cartesian product of the decompositions (small products only)."""
    ctx = result.best.context
    best = None
    params = RoundingParams()
    for attempt, idx in enumerate(itertools.product(*(range(d.N) for d in result.decs))):
        fe = compose([d.entries[i][0] for d, i in zip(result.decs, idx)], result.forest, g, ctx=ctx)
        c = Candidate(attempt, idx, fe.cost, fe.crf, fe.max_latency_relax, _accept(fe, params))
        if best is None or _rank(c, selection) < _rank(best, selection):
            best = c
    return best
