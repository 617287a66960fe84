"""Flow formulation of joint placement, routing and resource allocation.

Variables (all indexed densely, see :func:`variable_index`):

* ``F(k, link)``     commodity flow, binary (``[0, 1]`` when relaxed)
* ``MuObj(o, link)`` object flow, the max of the sized commodity flows of ``o``
* ``Mu(link)``       information flow, sum of object flows
* ``LLocal(k)``      latency accumulated along k's own path
* ``LCum(k)``        cumulative latency from the sources up to k's consumer
* ``Blocks(link)``   allocated resource blocks

Row provenance tags name the constraint family: ``conservation``,
``chaining``, ``coupling``, ``aggregate``, ``capacity``, ``latency-local``,
``latency-source``, ``latency-chain``, ``latency-bound``, ``block-capacity``
and ``block-limit``.  Forced zeros/ones of the source, destination and
chaining families are variable bounds, not rows.

Row counts (asserted in the tests)::

    conservation    |V| * |K|
    chaining        sum over non-source k of |X(k)| * |allowed nodes of k's producer|
    coupling        #(k, link) pairs that are not fixed to zero and have a positive rate
    aggregate       #links carrying at least one object variable
    capacity        #finite-capacity links not managed by blocks
    block-*         #block-managed links, one row each
    latency-*       |K|, |K^s|, sum over non-source k of |X(k)|, #bounded destination commodities
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .cloudnet import AugmentedGraph, Link, LinkKind, NodeKind
from .errors import UnknownVariable, UnresolvableEndpoint, UnsupportedPlacement, ZeroBlockCapacity
from .servicegraph import FunctionKind, ServiceGraph, make_info_unaware, require_valid


# ---------------------------------------------------------------------------
# variable keys


@dataclass(frozen=True)
class F:
    k: int
    link: int

    @property
    def name(self) -> str:
        return f"f_k{self.k}_e{self.link}"


@dataclass(frozen=True)
class MuObj:
    o: int
    link: int

    @property
    def name(self) -> str:
        return f"muo_o{self.o}_e{self.link}"


@dataclass(frozen=True)
class Mu:
    link: int

    @property
    def name(self) -> str:
        return f"mu_e{self.link}"


@dataclass(frozen=True)
class LLocal:
    k: int

    @property
    def name(self) -> str:
        return f"ll_k{self.k}"


@dataclass(frozen=True)
class LCum:
    k: int

    @property
    def name(self) -> str:
        return f"lt_k{self.k}"


@dataclass(frozen=True)
class Blocks:
    link: int

    @property
    def name(self) -> str:
        return f"y_e{self.link}"


VariableKey = F | MuObj | Mu | LLocal | LCum | Blocks


@dataclass(frozen=True)
class FormulationOptions:
    info_aware: bool = True
    latency_enabled: bool = False
    resource_blocks: bool = False
    burstiness_enabled: bool = False
    relaxed: bool = False


@dataclass
class Row:
    cols: np.ndarray
    vals: np.ndarray
    sense: str  # "<=", "=", ">="
    rhs: float
    tag: str


class LpProblem:
    """Linear program over named variables: min c x, rows, lo <= x <= hi."""

    def __init__(self, variables: list, c, lo, hi, integer, rows: list[Row], name: str = "idago",
                 context: "ModelContext | None" = None):
        self.variables = list(variables)
        self._index = {key: i for i, key in enumerate(self.variables)}
        if len(self._index) != len(self.variables):
            raise ValueError("duplicate variable keys")
        self.c = np.asarray(c, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.integer = np.asarray(integer, dtype=bool)
        self.rows = rows
        self.name = name
        self.context = context
        self._names = None

    @property
    def n_cols(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def relaxed(self) -> bool:
        return not self.integer.any()

    def index(self, key) -> int:
        try:
            return self._index[key]
        except (KeyError, TypeError):
            raise UnknownVariable(f"unknown variable {key!r}") from None

    def key(self, col: int):
        return self.variables[col]

    def has(self, key) -> bool:
        return key in self._index

    def names(self) -> list[str]:
        if self._names is None:
            self._names = [v.name if hasattr(v, "name") else str(v) for v in self.variables]
        return self._names

    def matrix(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((0, self.n_cols))
        indptr = np.zeros(len(self.rows) + 1, dtype=np.int64)
        for i, r in enumerate(self.rows):
            indptr[i + 1] = indptr[i] + len(r.cols)
        cols = np.concatenate([r.cols for r in self.rows]).astype(np.int64)
        vals = np.concatenate([r.vals for r in self.rows]).astype(float)
        m = sp.csr_matrix((vals, cols, indptr), shape=(len(self.rows), self.n_cols))
        m.sum_duplicates()
        return m

    def senses(self) -> list[str]:
        return [r.sense for r in self.rows]

    def rhs(self) -> np.ndarray:
        return np.array([r.rhs for r in self.rows], dtype=float)

    def row_counts(self) -> Counter:
        return Counter(r.tag for r in self.rows)

    def relaxation(self) -> "LpProblem":
        return LpProblem(self.variables, self.c, self.lo, self.hi, np.zeros(self.n_cols, bool), self.rows,
                         self.name, self.context)

    def objective_value(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float))

    def max_violation(self, x) -> float:
        """Largest row or bound violation of assignment ``x``."""
        x = np.asarray(x, dtype=float)
        worst = float(np.max(np.maximum(self.lo - x, 0.0), initial=0.0))
        worst = max(worst, float(np.max(np.maximum(x - self.hi, 0.0), initial=0.0)))
        if self.rows:
            act = self.matrix() @ x
            for a, r in zip(act, self.rows):
                if r.sense == "<=":
                    worst = max(worst, a - r.rhs)
                elif r.sense == ">=":
                    worst = max(worst, r.rhs - a)
                else:
                    worst = max(worst, abs(a - r.rhs))
        return worst


def variable_index(p: LpProblem, key) -> int:
    return p.index(key)


def variable_key(p: LpProblem, col: int):
    return p.key(col)


# ---------------------------------------------------------------------------
# resolved model data shared with decomposition and rounding


@dataclass
class ModelContext:
    """Resolved placement data for one (graph, service, options) triple."""

    g: AugmentedGraph
    s: ServiceGraph
    opts: FormulationOptions
    location: dict[str, int]  # source/destination function -> endpoint node
    allowed: dict[str, tuple[int, ...]]  # processing function -> computation nodes
    rate: np.ndarray  # |K| x |E^a| effective rate R*B
    latency: np.ndarray  # |K| x |E^a| per-commodity link latency
    lo: np.ndarray  # |K| x |E^a| flow bounds after fixings
    hi: np.ndarray
    object_of: np.ndarray  # |K| object index
    _k_index: dict[str, int] = field(default_factory=dict)

    def k(self, kid: str) -> int:
        return self._k_index[kid]

    def producer_nodes(self, kid: str) -> tuple[int, ...]:
        """Nodes where commodity ``kid`` can be emitted."""
        spec = self.s.commodity(kid)
        f = self.s.function(spec.producer)
        if f.kind is FunctionKind.SOURCE:
            return (self.location[f.id],)
        return self.allowed[f.id]


def link_latency(link: Link, processing_delay: float) -> float:
    if link.kind is LinkKind.COMMUNICATION:
        return link.latency
    if link.kind is LinkKind.COMPUTATION_OUT:
        return processing_delay
    return 0.0


def resolve(g: AugmentedGraph, s: ServiceGraph, opts: FormulationOptions) -> ModelContext:
    require_valid(s)
    if not opts.info_aware:
        s = make_info_unaware(s)
    location: dict[str, int] = {}
    allowed: dict[str, tuple[int, ...]] = {}
    comp_nodes = g.computation_nodes
    for f in s.functions:
        if f.kind is FunctionKind.PROCESSING:
            if f.allowed_hosts:
                ids = []
                for label in sorted(f.allowed_hosts):
                    if not g.has_label(label) or g.nodes[g.node_id(label)].kind is not NodeKind.COMPUTATION:
                        raise UnresolvableEndpoint(f"function {f.id}: {label!r} is not a computation node")
                    ids.append(g.node_id(label))
                kinds = {g.nodes[p].cluster_kind for p in ids}
                if len(kinds) > 1:
                    raise UnsupportedPlacement(f"function {f.id} mixes cluster kinds {sorted(map(str, kinds))}")
                allowed[f.id] = tuple(sorted(ids))
            else:
                allowed[f.id] = tuple(comp_nodes)
        else:
            want = NodeKind.SOURCE if f.kind is FunctionKind.SOURCE else NodeKind.DESTINATION
            if not f.location or not g.has_label(f.location) or g.nodes[g.node_id(f.location)].kind is not want:
                raise UnresolvableEndpoint(f"function {f.id}: no {want.value.lower()} node {f.location!r}")
            location[f.id] = g.node_id(f.location)

    nK, nE = len(s.commodities), len(g.links)
    rate = np.zeros((nK, nE))
    lat = np.zeros((nK, nE))
    lo = np.zeros((nK, nE))
    hi = np.zeros((nK, nE))
    for ki, k in enumerate(s.commodities):
        prod = s.function(k.producer)
        cons = s.function(k.consumer)
        prod_nodes = set(allowed.get(prod.id, ()))
        cons_nodes = set(allowed.get(cons.id, ()))
        for link in g.links:
            e = link.id
            rate[ki, e] = k.rate(link.kind, opts.burstiness_enabled)
            lat[ki, e] = link_latency(link, k.processing_delay)
            if link.kind is LinkKind.COMMUNICATION:
                hi[ki, e] = 1.0
            elif link.kind is LinkKind.COMPUTATION_OUT:
                hi[ki, e] = 1.0 if prod.kind is FunctionKind.PROCESSING and link.tail in prod_nodes else 0.0
            elif link.kind is LinkKind.COMPUTATION_IN:
                hi[ki, e] = 1.0 if cons.kind is FunctionKind.PROCESSING and link.head in cons_nodes else 0.0
            elif link.kind is LinkKind.SOURCE:
                if prod.kind is FunctionKind.SOURCE and link.tail == location[prod.id]:
                    lo[ki, e] = hi[ki, e] = 1.0
            elif link.kind is LinkKind.DESTINATION:
                if cons.kind is FunctionKind.DESTINATION and link.head == location[cons.id]:
                    lo[ki, e] = hi[ki, e] = 1.0
    obj = np.array([s.object_index(k.obj) for k in s.commodities], dtype=int)
    kidx = {k.id: i for i, k in enumerate(s.commodities)}
    return ModelContext(g, s, opts, location, allowed, rate, lat, lo, hi, obj, kidx)


# ---------------------------------------------------------------------------


def build(g: AugmentedGraph, s: ServiceGraph, opts: FormulationOptions = FormulationOptions()) -> LpProblem:
    ctx = resolve(g, s, opts)
    s = ctx.s
    K, E = len(s.commodities), len(g.links)
    use_blocks = opts.resource_blocks
    if use_blocks:
        for link in g.links:
            if link.blocks is not None and link.blocks.block_capacity <= 0:
                raise ZeroBlockCapacity(f"link {link.id} has zero block capacity")

    keys: list = []
    lo: list[float] = []
    hi: list[float] = []
    integer: list[bool] = []

    def add(key, lb, ub, is_int):
        keys.append(key)
        lo.append(lb)
        hi.append(ub)
        integer.append(is_int)
        return len(keys) - 1

    fcol = np.empty((K, E), dtype=np.int64)
    for k in range(K):
        for e in range(E):
            fcol[k, e] = add(F(k, e), ctx.lo[k, e], ctx.hi[k, e], not opts.relaxed)

    active = (ctx.hi > 0) & (ctx.rate > 0)  # (k, link) pairs that can load a link
    mucol: dict[tuple[int, int], int] = {}
    for e in range(E):
        objs = sorted({int(ctx.object_of[k]) for k in range(K) if active[k, e]})
        for o in objs:
            mucol[(o, e)] = add(MuObj(o, e), 0.0, math.inf, False)
    mcol = [add(Mu(e), 0.0, math.inf, False) for e in range(E)]
    block_links = [lk for lk in g.links if use_blocks and lk.blocks is not None]
    ycol = {lk.id: add(Blocks(lk.id), 0.0, math.inf, not opts.relaxed) for lk in block_links}
    if opts.latency_enabled:
        llcol = [add(LLocal(k), 0.0, math.inf, False) for k in range(K)]
        ltcol = [add(LCum(k), 0.0, math.inf, False) for k in range(K)]

    c = np.zeros(len(keys))
    for lk in g.links:
        if lk.id in ycol:
            c[ycol[lk.id]] = lk.blocks.block_cost
        else:
            c[mcol[lk.id]] = lk.unit_cost

    rows: list[Row] = []

    def row(cols, vals, sense, rhs, tag):
        rows.append(Row(np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float), sense, float(rhs), tag))

    # flow conservation at communication nodes
    for u in g.communication_nodes:
        ins = g.in_links(u)
        outs = g.out_links(u)
        for k in range(K):
            cols, vals = [], []
            for e in ins:
                if ctx.hi[k, e] > 0:
                    cols.append(fcol[k, e])
                    vals.append(1.0)
            for e in outs:
                if ctx.hi[k, e] > 0:
                    cols.append(fcol[k, e])
                    vals.append(-1.0)
            row(cols, vals, "=", 0.0, "conservation")

    # chaining at computation nodes
    for ki, kspec in enumerate(s.commodities):
        prod = s.function(kspec.producer)
        if prod.kind is FunctionKind.SOURCE:
            continue
        for lid in s.input_commodities(kspec.id):
            li = ctx.k(lid)
            for p in ctx.allowed[prod.id]:
                lin, lout = g.gadget_links(p)
                row([fcol[ki, lout], fcol[li, lin]], [1.0, -1.0], "=", 0.0, "chaining")

    # sized commodity flows bounded by the object flow
    for k in range(K):
        o = int(ctx.object_of[k])
        for e in np.nonzero(active[k])[0]:
            row([fcol[k, e], mucol[(o, int(e))]], [ctx.rate[k, e], -1.0], "<=", 0.0, "coupling")

    # information flow and capacities
    for lk in g.links:
        e = lk.id
        objs = [col for (o, ee), col in mucol.items() if ee == e]
        if objs:
            row(objs + [mcol[e]], [1.0] * len(objs) + [-1.0], "<=", 0.0, "aggregate")
        if e in ycol:
            row([mcol[e], ycol[e]], [1.0, -lk.blocks.block_capacity], "<=", 0.0, "block-capacity")
            row([ycol[e]], [1.0], "<=", lk.blocks.max_blocks, "block-limit")
        elif lk.capacitated:
            row([mcol[e]], [1.0], "<=", lk.capacity, "capacity")

    if opts.latency_enabled:
        for k in range(K):
            es = [e for e in range(E) if ctx.hi[k, e] > 0 and ctx.latency[k, e] != 0]
            row([llcol[k]] + [fcol[k, e] for e in es], [1.0] + [-ctx.latency[k, e] for e in es], "=", 0.0,
                "latency-local")
        for ki, kspec in enumerate(s.commodities):
            if s.function(kspec.producer).kind is FunctionKind.SOURCE:
                row([ltcol[ki], llcol[ki]], [1.0, -1.0], "=", 0.0, "latency-source")
            else:
                for lid in s.input_commodities(kspec.id):
                    row([ltcol[ki], llcol[ki], ltcol[ctx.k(lid)]], [1.0, -1.0, -1.0], ">=", 0.0, "latency-chain")
        for ki, kspec in enumerate(s.commodities):
            if kspec.latency_bound is not None and s.is_destination_commodity(kspec.id):
                row([ltcol[ki]], [1.0], "<=", kspec.latency_bound, "latency-bound")

    return LpProblem(keys, c, lo, hi, integer, rows, name="idago", context=ctx)


# ---------------------------------------------------------------------------
# helpers on solutions


def flow_matrix(p: LpProblem, x) -> np.ndarray:
    """|K| x |E^a| matrix of commodity flows from a solution vector."""
    ctx = p.context
    K, E = len(ctx.s.commodities), len(ctx.g.links)
    cols = np.array([p.index(F(k, e)) for k in range(K) for e in range(E)], dtype=np.int64)
    return np.asarray(x, dtype=float)[cols].reshape(K, E)


def realize(ctx: ModelContext, flows: np.ndarray) -> dict[str, np.ndarray]:
    """Object/information flows, blocks and latencies implied by given flows.

    Uses the tight values: object flow is the max of the sized commodity
    flows of that object, information flow is the sum over objects, blocks
    round the information flow up.
    """
    g, s = ctx.g, ctx.s
    K, E = flows.shape
    nO = len(s.objects)
    sized = flows * ctx.rate
    mu_obj = np.zeros((nO, E))
    for k in range(K):
        o = ctx.object_of[k]
        np.maximum(mu_obj[o], sized[k], out=mu_obj[o])
    mu = mu_obj.sum(axis=0)
    y = np.zeros(E)
    for lk in g.links:
        if lk.blocks is not None and lk.blocks.block_capacity > 0:
            y[lk.id] = math.ceil(mu[lk.id] / lk.blocks.block_capacity - 1e-9) if mu[lk.id] > 1e-12 else 0.0
    l_local = (flows * ctx.latency).sum(axis=1)
    l_cum = np.zeros(K)
    order = {fid: i for i, fid in enumerate(s.topological_order())}
    for k in sorted(range(K), key=lambda k: order[s.commodities[k].producer]):
        ins = s.input_commodities(s.commodities[k].id)
        l_cum[k] = l_local[k] + (max(l_cum[ctx.k(l)] for l in ins) if ins else 0.0)
    return {"mu_obj": mu_obj, "mu": mu, "y": y, "l_local": l_local, "l_cum": l_cum}


def cost_of(ctx: ModelContext, mu: np.ndarray, y: np.ndarray) -> float:
    total = 0.0
    for lk in ctx.g.links:
        if ctx.opts.resource_blocks and lk.blocks is not None:
            total += y[lk.id] * lk.blocks.block_cost
        else:
            total += mu[lk.id] * lk.unit_cost
    return float(total)


def assignment_from_flows(p: LpProblem, flows: np.ndarray) -> np.ndarray:
    """Complete solution vector for ``p`` induced by commodity flows."""
    ctx = p.context
    r = realize(ctx, flows)
    x = np.zeros(p.n_cols)
    for col, key in enumerate(p.variables):
        if isinstance(key, F):
            x[col] = flows[key.k, key.link]
        elif isinstance(key, MuObj):
            x[col] = r["mu_obj"][key.o, key.link]
        elif isinstance(key, Mu):
            x[col] = r["mu"][key.link]
        elif isinstance(key, Blocks):
            x[col] = r["y"][key.link] if not p.relaxed else r["mu"][key.link] / ctx.g.links[key.link].blocks.block_capacity
        elif isinstance(key, LLocal):
            x[col] = r["l_local"][key.k]
        elif isinstance(key, LCum):
            x[col] = r["l_cum"][key.k]
    return x


def normalize_solution(p: LpProblem, x) -> np.ndarray:
    """Replace auxiliary variables by their tight values for the given flows.

    Object flows become the max of their sized commodity flows, information
    flows their sum, blocks ``mu / c^b`` (relaxed) and latencies their
    realized values.  For an optimal solution with positive link costs this
    changes nothing; on zero-cost links it removes arbitrary slack.
    """
    flows = np.clip(flow_matrix(p, x), 0.0, 1.0)
    return assignment_from_flows(p, flows)


def expected_row_counts(g: AugmentedGraph, s: ServiceGraph, opts: FormulationOptions) -> Counter:
    """Row counts predicted from instance sizes (see the module docstring)."""
    ctx = resolve(g, s, opts)
    s = ctx.s
    counts: Counter = Counter()
    counts["conservation"] = len(g.communication_nodes) * len(s.commodities)
    for kspec in s.commodities:
        prod = s.function(kspec.producer)
        if prod.kind is not FunctionKind.SOURCE:
            counts["chaining"] += len(s.input_commodities(kspec.id)) * len(ctx.allowed[prod.id])
    active = (ctx.hi > 0) & (ctx.rate > 0)
    counts["coupling"] = int(active.sum())
    counts["aggregate"] = int(active.any(axis=0).sum())
    for lk in g.links:
        if opts.resource_blocks and lk.blocks is not None:
            counts["block-capacity"] += 1
            counts["block-limit"] += 1
        elif lk.capacitated:
            counts["capacity"] += 1
    if opts.latency_enabled:
        counts["latency-local"] = len(s.commodities)
        counts["latency-source"] = len(s.source_commodities)
        counts["latency-chain"] = sum(len(s.input_commodities(k)) for k in s.processing_commodities)
        counts["latency-bound"] = sum(
            1 for k in s.commodities if k.latency_bound is not None and s.is_destination_commodity(k.id))
    return +counts
