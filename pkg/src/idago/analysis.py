"""Metrics and the probabilistic view of randomized rounding.

Every commodity flow of a rounded embedding is a Bernoulli variable whose
parameter is the fractional LP flow on that link.  From there we get exact
distributions of object flows, closed-form expectations of link loads and
cost, Monte Carlo estimates of cumulative latency, and Hoeffding-style tail
bounds on capacity, latency, cost and block usage.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cloudnet import AugmentedGraph, LinkKind
from .decompose import Decomposition
from .errors import (InvalidTheta, MissingDecomposition, NonpositiveAlpha, NonpositiveArgument, NonpositiveBeta,
                     ZeroBaselineCost)
from .formulation import ModelContext, cost_of, flow_matrix, realize
from .lpsolve import LpSolution
from .rounding import capacity_relaxation, stream
from .transform import ServiceForest

ACTIVE_EPS = 1e-9


def car(idago_cost: float, milp_forest_cost: float) -> float:
    if not milp_forest_cost > 0:
        raise ZeroBaselineCost(f"baseline cost {milp_forest_cost!r} is not positive")
    return idago_cost / milp_forest_cost


def crf(embedding, g: AugmentedGraph) -> float:
    """Capacity relaxation factor of a composed embedding (or a raw information flow vector)."""
    mu = embedding.mu if hasattr(embedding, "mu") else np.asarray(embedding)
    return capacity_relaxation(g, mu)


# ---------------------------------------------------------------------------
# object flow distribution


@dataclass(frozen=True)
class ObjectFlowPmf:
    support: tuple[float, ...]
    probabilities: tuple[float, ...]

    @property
    def expectation(self) -> float:
        return float(sum(v * p for v, p in zip(self.support, self.probabilities)))

    def prob(self, value: float, tol: float = 1e-12) -> float:
        return sum(p for v, p in zip(self.support, self.probabilities) if abs(v - value) <= tol)


def pmf_from_rates(rates, probs) -> ObjectFlowPmf:
    """Law of the max of independent ``rate_i * Bernoulli(prob_i)`` draws.

    Sorting by rate, the max equals the i-th rate exactly when commodity i
    is on and every larger-rate commodity is off.
    """
    pairs = sorted((float(r), min(max(float(q), 0.0), 1.0)) for r, q in zip(rates, probs) if r > 0)
    mass: dict[float, float] = {}
    off_above = 1.0
    for r, q in reversed(pairs):
        mass[r] = mass.get(r, 0.0) + off_above * q
        off_above *= 1.0 - q
    mass[0.0] = mass.get(0.0, 0.0) + off_above
    support = tuple(sorted(mass))
    return ObjectFlowPmf(support, tuple(mass[v] for v in support))


def object_flow_pmf(link: int, obj, lp: LpSolution, forest: ServiceForest | None = None) -> ObjectFlowPmf:
    """Distribution of the rounded flow of ``obj`` (name or index) on ``link``."""
    ctx = lp.problem.context
    o = ctx.s.object_index(obj) if isinstance(obj, str) else int(obj)
    flows = flow_matrix(lp.problem, lp.x)
    ks = np.nonzero(ctx.object_of == o)[0]
    return pmf_from_rates(ctx.rate[ks, link], flows[ks, link])


def expected_object_flows(ctx: ModelContext, flows: np.ndarray) -> np.ndarray:
    """E[nu^o] per (object, link) under independent commodity flows."""
    nO, E = len(ctx.s.objects), flows.shape[1]
    out = np.zeros((nO, E))
    for o in range(nO):
        ks = np.nonzero(ctx.object_of == o)[0]
        if len(ks) == 0:
            continue
        for e in range(E):
            rates, qs = ctx.rate[ks, e], flows[ks, e]
            if np.any((rates > 0) & (qs > 0)):
                out[o, e] = pmf_from_rates(rates, qs).expectation
    return out


# ---------------------------------------------------------------------------
# sampling model


@dataclass
class RandomEmbeddingModel:
    """Independent per-tree draws from the decompositions, precomputed for fast sampling."""

    ctx: ModelContext
    forest: ServiceForest
    decs: list[Decomposition]
    flows_hat: np.ndarray  # |K^T| x |E^a| LP flows
    # per tree: list over entries of (object x link) sized max flows, and latency vectors
    tree_obj: list[np.ndarray] = field(default_factory=list, repr=False)
    tree_lat: list[np.ndarray] = field(default_factory=list, repr=False)
    tree_ind: list[np.ndarray] = field(default_factory=list, repr=False)

    @classmethod
    def build(cls, lp: LpSolution, decs: list[Decomposition], forest: ServiceForest) -> "RandomEmbeddingModel":
        if not decs or len(decs) != forest.M:
            raise MissingDecomposition(f"need {forest.M} decompositions, got {len(decs) if decs else 0}")
        ctx = lp.problem.context
        model = cls(ctx, forest, decs, flow_matrix(lp.problem, lp.x))
        for dec in decs:
            objs, lats, inds = [], [], []
            for emb, _ in dec.entries:
                ind = emb.indicator(ctx)
                r = realize(ctx, ind)
                objs.append(r["mu_obj"])
                lats.append(r["l_cum"])
                inds.append(ind)
            model.tree_obj.append(np.stack(objs))
            model.tree_lat.append(np.stack(lats))
            model.tree_ind.append(np.stack(inds))
        return model

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(d.N for d in self.decs)

    def combine(self, idx) -> tuple[np.ndarray, np.ndarray, float]:
        """(information flow per link, cumulative latency per commodity, cost) of one joint draw."""
        mu_obj = np.zeros_like(self.tree_obj[0][0])
        lat = np.zeros(len(self.ctx.s.commodities))
        for phi, i in enumerate(idx):
            np.maximum(mu_obj, self.tree_obj[phi][i], out=mu_obj)
            lat += self.tree_lat[phi][i]  # each commodity belongs to one tree, others are zero
        mu = mu_obj.sum(axis=0)
        return mu, lat, self._cost(mu)

    def _cost(self, mu: np.ndarray) -> float:
        y = np.zeros_like(mu)
        for lk in self.ctx.g.links:
            if lk.blocks is not None and lk.blocks.block_capacity > 0 and mu[lk.id] > 1e-12:
                y[lk.id] = math.ceil(mu[lk.id] / lk.blocks.block_capacity - 1e-9)
        return cost_of(self.ctx, mu, y)

    def draw(self, n: int, seed: int = 0) -> list[tuple[int, ...]]:
        """``n`` joint draws; draw t of tree phi uses the same stream as rounding try t."""
        cdfs = [np.cumsum(d.probabilities) for d in self.decs]
        out = []
        for t in range(n):
            idx = []
            for phi, cdf in enumerate(cdfs):
                u = stream(seed, t, phi).random() * cdf[-1]
                idx.append(min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1))
            out.append(tuple(idx))
        return out

    def draw_fast(self, n: int, seed: int = 0) -> np.ndarray:
        """``n`` x M joint draws from one generator (for large Monte Carlo runs)."""
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xA11])))
        cols = []
        for d in self.decs:
            p = d.probabilities
            cols.append(rng.choice(len(p), size=n, p=p / p.sum()))
        return np.stack(cols, axis=1) if cols else np.zeros((n, 0), dtype=int)

    def sample(self, n: int, seed: int = 0) -> dict[str, np.ndarray]:
        """Sampled link loads (n x E), cumulative latencies (n x K) and costs (n)."""
        draws = self.draw_fast(n, seed)
        mus, lats, costs = [], [], []
        cache: dict[tuple, tuple] = {}
        for row in draws:
            key = tuple(int(i) for i in row)
            if key not in cache:
                cache[key] = self.combine(key)
            mu, lat, c = cache[key]
            mus.append(mu)
            lats.append(lat)
            costs.append(c)
        return {"mu": np.array(mus), "l_cum": np.array(lats), "cost": np.array(costs)}

    def enumerate_exact(self, limit: int = 1 << 20) -> dict[str, np.ndarray]:
        """Exact expectations over the Cartesian product of decomposition entries."""
        total = math.prod(self.sizes)
        if total > limit:
            raise NonpositiveArgument(f"product of decomposition sizes {total} exceeds {limit}")
        E, K = self.flows_hat.shape[1], len(self.ctx.s.commodities)
        e_mu, e_lat, e_cost = np.zeros(E), np.zeros(K), 0.0
        probs = [d.probabilities for d in self.decs]
        for idx in itertools.product(*(range(n) for n in self.sizes)):
            w = math.prod(float(probs[phi][i]) for phi, i in enumerate(idx))
            mu, lat, c = self.combine(idx)
            e_mu += w * mu
            e_lat += w * lat
            e_cost += w * c
        return {"mu": e_mu, "l_cum": e_lat, "cost": e_cost}


@dataclass
class Expectations:
    nu: np.ndarray  # E[nu] per link, closed form
    omega: float  # E[Omega]; closed form for proportional cost, Monte Carlo with blocks
    omega_se: float
    latency: dict[str, float]  # destination commodity -> E[lambda_T] (Monte Carlo)
    latency_se: dict[str, float]


def expectations(model: RandomEmbeddingModel, n_mc: int = 10_000, seed: int = 0) -> Expectations:
    if n_mc < 1:
        raise NonpositiveArgument("n_mc must be >= 1")
    ctx = model.ctx
    nu = expected_object_flows(ctx, model.flows_hat).sum(axis=0)
    blocks = ctx.opts.resource_blocks and any(lk.blocks is not None for lk in ctx.g.links)
    samples = model.sample(n_mc, seed)
    if blocks:
        omega = float(samples["cost"].mean())
        omega_se = float(samples["cost"].std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    else:
        omega = float(sum(nu[lk.id] * lk.unit_cost for lk in ctx.g.links))
        omega_se = 0.0
    lat, lat_se = {}, {}
    for ki, spec in enumerate(ctx.s.commodities):
        if ctx.s.is_destination_commodity(spec.id):
            col = samples["l_cum"][:, ki]
            lat[spec.id] = float(col.mean())
            lat_se[spec.id] = float(col.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    return Expectations(nu, omega, omega_se, lat, lat_se)


# ---------------------------------------------------------------------------
# bound inputs


@dataclass
class BoundInputs:
    ctx: ModelContext
    xi: np.ndarray  # per link: sum over objects of the squared active rate
    active_sum: np.ndarray  # per link: sum over objects of the active rate
    chi: float
    expected_nu: np.ndarray
    expected_omega: float
    c_lp: float
    lambda_max: dict[str, float]  # per commodity envelopes
    lambda_min: dict[str, float]
    expected_latency: dict[str, float]
    r_max: float

    def capacity(self, link: int) -> float:
        return self.ctx.g.links[link].capacity

    def condition_f(self, link: int, delta_beta1: float = 1.0) -> bool:
        """True when the largest possible load stays within the relaxed capacity."""
        lk = self.ctx.g.links[link]
        if not lk.capacitated:
            return True
        return self.active_sum[link] <= delta_beta1 * lk.capacity + 1e-9

    def failing_links(self, delta_beta1: float = 1.0) -> list[int]:
        return [lk.id for lk in self.ctx.g.links if lk.capacitated and not self.condition_f(lk.id, delta_beta1)]

    @property
    def destination_bounds(self) -> dict[str, float]:
        s = self.ctx.s
        return {k.id: k.latency_bound for k in s.commodities
                if s.is_destination_commodity(k.id) and k.latency_bound is not None}

    @property
    def global_lambda(self) -> tuple[float, float]:
        dest = [k.id for k in self.ctx.s.commodities if self.ctx.s.is_destination_commodity(k.id)]
        return (max((self.lambda_max[k] for k in dest), default=0.0),
                min((self.lambda_min[k] for k in dest), default=0.0))

    def kappa(self, delta_beta1: float = 1.0) -> float:
        ef = self.failing_links(delta_beta1)
        if not ef:
            return 0.0
        c_min = min(self.capacity(e) for e in ef)
        return min(1.0, self.r_max / c_min) if c_min > 0 else 1.0


def active_rates(ctx: ModelContext, flows: np.ndarray) -> np.ndarray:
    """Per (object, link): largest rate among commodities with positive LP flow."""
    nO, E = len(ctx.s.objects), flows.shape[1]
    out = np.zeros((nO, E))
    sized = np.where(flows > ACTIVE_EPS, ctx.rate, 0.0)
    for k in range(flows.shape[0]):
        np.maximum(out[ctx.object_of[k]], sized[k], out=out[ctx.object_of[k]])
    return out


def latency_envelopes(forest: ServiceForest, decs: list[Decomposition], ctx: ModelContext) -> tuple[dict, dict]:
    """Upper and lower cumulative latency envelopes per commodity.

    Path lengths and per-link latencies are taken over the links the
    decomposition actually uses for each commodity, counting only links that
    can carry latency: communication links, and the producer's exit link when
    the commodity has a processing delay.
    """
    if not decs or len(decs) != forest.M:
        raise MissingDecomposition("latency envelopes need one decomposition per tree")
    s = ctx.s
    g = ctx.g
    hop_max, hop_min, l_max, l_min = {}, {}, {}, {}
    for dec in decs:
        for emb, _ in dec.entries:
            for kid, path in emb.commodity_map.items():
                delay = s.commodity(kid).processing_delay > 0
                hops = [e for e in path if g.links[e].kind is LinkKind.COMMUNICATION
                        or (delay and g.links[e].kind is LinkKind.COMPUTATION_OUT)]
                lats = [ctx.latency[ctx.k(kid), e] for e in hops] or [0.0]
                hop_max[kid] = max(hop_max.get(kid, 0), len(hops))
                hop_min[kid] = min(hop_min.get(kid, len(hops)), len(hops))
                l_max[kid] = max(l_max.get(kid, 0.0), max(lats))
                l_min[kid] = min(l_min.get(kid, math.inf), min(lats))
    up, down = {}, {}
    order = {fid: i for i, fid in enumerate(s.topological_order())}
    for spec in sorted(s.commodities, key=lambda k: order[k.producer]):
        kid = spec.id
        if kid not in hop_max:
            raise MissingDecomposition(f"commodity {kid} is not mapped by any embedding")
        ins = s.input_commodities(kid)
        up[kid] = l_max[kid] * hop_max[kid] + (max(up[x] for x in ins) if ins else 0.0)
        down[kid] = l_min[kid] * hop_min[kid] + (min(down[x] for x in ins) if ins else 0.0)
    return up, down


def bound_inputs(lp: LpSolution, decs: list[Decomposition], forest: ServiceForest,
                 model: RandomEmbeddingModel | None = None, n_mc: int = 10_000, seed: int = 0) -> BoundInputs:
    ctx = lp.problem.context
    model = model or RandomEmbeddingModel.build(lp, decs, forest)
    flows = model.flows_hat
    act = active_rates(ctx, flows)
    xi = (act ** 2).sum(axis=0)
    active_sum = act.sum(axis=0)
    weights = np.array([lk.blocks.block_cost / lk.blocks.block_capacity
                        if ctx.opts.resource_blocks and lk.blocks is not None and lk.blocks.block_capacity > 0
                        else lk.unit_cost for lk in ctx.g.links])
    chi = float((weights ** 2 * active_sum ** 2).sum())
    ex = expectations(model, n_mc, seed) if ctx.opts.latency_enabled or ctx.opts.resource_blocks else None
    nu = ex.nu if ex else expected_object_flows(ctx, flows).sum(axis=0)
    omega = ex.omega if ex else float(sum(nu[lk.id] * lk.unit_cost for lk in ctx.g.links))
    up, down = latency_envelopes(forest, decs, ctx)
    lat = ex.latency if ex else {}
    return BoundInputs(ctx, xi, active_sum, chi, nu, omega, float(lp.objective), up, down, lat,
                       float(act.max(initial=0.0)))


# ---------------------------------------------------------------------------
# tail bounds


def capacity_bound(link: int, delta_beta1: float, inputs: BoundInputs) -> float:
    if inputs.condition_f(link, delta_beta1):
        return 0.0
    c = inputs.capacity(link)
    beta1 = delta_beta1 - inputs.expected_nu[link] / c
    if beta1 <= 0:
        raise NonpositiveBeta(f"link {link}: beta1 = {beta1:.6g} <= 0")
    return math.exp(-2.0 * (beta1 * c) ** 2 / inputs.xi[link])


def condition_f(link: int, inputs: BoundInputs, delta_beta1: float = 1.0) -> bool:
    return inputs.condition_f(link, delta_beta1)


def latency_bound(kid: str, delta_beta2: float, inputs: BoundInputs, expected: float | None = None) -> float:
    spec = inputs.ctx.s.commodity(kid)
    if spec.latency_bound is None or spec.latency_bound <= 0:
        raise NonpositiveArgument(f"commodity {kid} has no positive latency bound")
    L = spec.latency_bound
    mean = expected if expected is not None else inputs.expected_latency.get(kid)
    if mean is None:
        raise MissingDecomposition(f"no expected latency for {kid}")
    beta2 = delta_beta2 - mean / L
    if beta2 <= 0:
        raise NonpositiveBeta(f"{kid}: beta2 = {beta2:.6g} <= 0")
    width = inputs.lambda_max[kid] - inputs.lambda_min[kid]
    if width <= 0:
        return 0.0
    return math.exp(-2.0 * (beta2 * L) ** 2 / width ** 2)


def cost_bound(delta_alpha: float, inputs: BoundInputs, c_lp_star: float | None = None) -> float:
    c_lp = inputs.c_lp if c_lp_star is None else c_lp_star
    if c_lp <= 0:
        raise ZeroBaselineCost("LP optimum is not positive")
    alpha = delta_alpha - inputs.expected_omega / c_lp
    if alpha <= 0:
        raise NonpositiveAlpha(f"alpha = {alpha:.6g} <= 0")
    if inputs.chi <= 0:
        return 0.0
    return math.exp(-2.0 * (alpha * c_lp) ** 2 / inputs.chi)


def block_bound(link: int, delta_beta1: float, inputs: BoundInputs, corrected: bool = False) -> float:
    """Probability that the rounded flow needs at least ``delta_beta1 * max_blocks`` blocks.

    The default divides the squared-rate sum by the block capacity once.  In
    block units the rates shrink by the block capacity, so the range term
    should be divided by its square; ``corrected=True`` does that.  The two
    agree for unit blocks, and the default is only conservative for blocks of
    capacity at least 1.
    """
    lk = inputs.ctx.g.links[link]
    if lk.blocks is None:
        raise NonpositiveArgument(f"link {link} has no resource blocks")
    if inputs.condition_f(link, delta_beta1):
        return 0.0
    c_t, c_b = lk.blocks.max_blocks, lk.blocks.block_capacity
    beta1 = delta_beta1 - inputs.expected_nu[link] / (c_t * c_b)
    arg = beta1 * c_t - 1.0
    if arg < 0:
        raise NonpositiveArgument(f"link {link}: beta1 * max_blocks = {beta1 * c_t:.6g} < 1")
    xi_t = inputs.xi[link] / (c_b * c_b if corrected else c_b)
    return math.exp(-2.0 * arg ** 2 / xi_t)


# ---------------------------------------------------------------------------
# approximation factors


@dataclass(frozen=True)
class FactorSet:
    delta_alpha: float
    delta_beta1: float
    delta_beta2: float
    valid: bool  # False when a logarithm argument below 1 made a radicand negative
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class TryFactors:
    theta: float
    as_printed: FactorSet
    sign_corrected: FactorSet
    failing_links: int
    destinations: int

    def success_prob(self, t: int) -> float:
        return 1.0 - self.theta ** t


def _root(x: float) -> tuple[float, bool]:
    return (math.sqrt(x), True) if x >= 0 else (math.nan, False)


def theorem2_factors(theta: float, inputs: BoundInputs, delta_beta1_ref: float = 1.0,
                     kappa: float | None = None) -> TryFactors:
    """Approximation and relaxation factors reached with probability ``1 - theta**t``.

    ``as_printed`` takes logarithms of ``theta/3`` style arguments; those are
    negative for ``theta < 1`` so the factors come out NaN and ``valid`` is
    False.  ``sign_corrected`` inverts the arguments, which is what equating
    each tail term to ``theta/3`` gives.
    """
    if not 0 < theta < 1:
        raise InvalidTheta(f"theta must lie in (0, 1), got {theta}")
    ef = inputs.failing_links(delta_beta1_ref)
    n_f = len(ef)
    dests = [k.id for k in inputs.ctx.s.commodities if inputs.ctx.s.is_destination_commodity(k.id)]
    n_d = len(dests)
    k_factor = inputs.kappa(delta_beta1_ref) if kappa is None else kappa
    d_alpha0 = inputs.expected_omega / inputs.c_lp if inputs.c_lp > 0 else math.nan
    d_beta1_0 = max((inputs.expected_nu[e] / inputs.capacity(e) for e in ef), default=0.0)
    bounds = inputs.destination_bounds
    d_beta2_0 = max((inputs.expected_latency.get(k, 0.0) / L for k, L in bounds.items() if L > 0), default=0.0)
    lam_max, lam_min = inputs.global_lambda
    l_min = min(bounds.values(), default=math.nan)

    def evaluate(arg_alpha: float, arg_beta1: float, arg_beta2: float) -> FactorSet:
        notes, ok = [], True
        r, good = _root(inputs.chi * math.log(arg_alpha) / 2.0)
        ok &= good
        d_alpha = r / inputs.c_lp + d_alpha0 if inputs.c_lp > 0 else math.nan
        if n_f:
            r, good = _root(0.5 * math.log(arg_beta1))
            ok &= good
            d_beta1 = k_factor * r + d_beta1_0
        else:
            d_beta1 = 1.0
            notes.append("every link satisfies the worst-case load test; capacity factor is 1")
        if bounds and n_d:
            r, good = _root(0.5 * math.log(arg_beta2))
            ok &= good
            d_beta2 = r * (lam_max - lam_min) / l_min + d_beta2_0
        else:
            d_beta2 = math.nan
            notes.append("no latency bounds")
        if not ok:
            notes.append("negative radicand")
        return FactorSet(d_alpha, d_beta1, d_beta2, ok, tuple(notes))

    printed = evaluate(theta / 3.0, theta * max(n_f, 1) / 3.0, theta * max(n_d, 1) / 3.0)
    corrected = evaluate(3.0 / theta, 3.0 * max(n_f, 1) / theta, 3.0 * max(n_d, 1) / theta)
    return TryFactors(theta, printed, corrected, n_f, n_d)
