"""Brute-force references that share no code with the solver pipeline.

Everything here is derived from the augmented graph and the service specs
alone: placements are enumerated, every commodity is routed over every
simple path, and link loads, costs and latencies are recomputed directly.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from idago.cloudnet import AugmentedGraph, LinkKind, NodeKind
from idago.servicegraph import FunctionKind, ServiceGraph


def comm_paths(g: AugmentedGraph, a: int, b: int, limit: int = 10_000) -> list[tuple[int, ...]]:
    """All simple paths from communication node ``a`` to ``b`` over communication links."""
    out: list[tuple[int, ...]] = []
    comm = {e for e in range(len(g.links)) if g.links[e].kind is LinkKind.COMMUNICATION}

    def walk(u, seen, path):
        if len(out) >= limit:
            return
        if u == b:
            out.append(tuple(path))
            return
        for e in g.out_links(u):
            if e in comm and g.links[e].head not in seen:
                seen.add(g.links[e].head)
                path.append(e)
                walk(g.links[e].head, seen, path)
                path.pop()
                seen.discard(g.links[e].head)

    walk(a, {a}, [])
    return out


def _exit_link(g: AugmentedGraph, node: int) -> int:
    n = g.nodes[node]
    if n.kind is NodeKind.COMPUTATION:
        return next(e for e in g.out_links(node) if g.links[e].kind is LinkKind.COMPUTATION_OUT)
    return next(e for e in g.out_links(node) if g.links[e].kind is LinkKind.SOURCE)


def _entry_link(g: AugmentedGraph, node: int) -> int:
    n = g.nodes[node]
    if n.kind is NodeKind.COMPUTATION:
        return next(e for e in g.in_links(node) if g.links[e].kind is LinkKind.COMPUTATION_IN)
    return next(e for e in g.in_links(node) if g.links[e].kind is LinkKind.DESTINATION)


def full_paths(g: AugmentedGraph, start: int, end: int) -> list[tuple[int, ...]]:
    first, last = _exit_link(g, start), _entry_link(g, end)
    a, b = g.links[first].head, g.links[last].tail
    return [(first,) + mid + (last,) for mid in comm_paths(g, a, b)]


def candidate_nodes(g: AugmentedGraph, s: ServiceGraph, fid: str) -> list[int]:
    f = s.function(fid)
    if f.kind is not FunctionKind.PROCESSING:
        return [g.node_id(f.location)]
    if f.allowed_hosts:
        return sorted(g.node_id(h) for h in f.allowed_hosts)
    return [n for n in range(len(g.nodes)) if g.nodes[n].kind is NodeKind.COMPUTATION]


def evaluate(g: AugmentedGraph, s: ServiceGraph, routes: dict[str, tuple[int, ...]], *, info_aware=True,
             latency=False, blocks=False) -> tuple[float, bool]:
    """(cost, feasible) of a complete routing, recomputed from scratch."""
    E = len(g.links)
    obj_flow: dict[tuple[str, int], float] = {}
    for k in s.commodities:
        o = k.obj if info_aware else k.id
        for e in routes[k.id]:
            r = k.rates.for_kind(g.links[e].kind)
            obj_flow[(o, e)] = max(obj_flow.get((o, e), 0.0), r)
    mu = np.zeros(E)
    for (_, e), v in obj_flow.items():
        mu[e] += v
    cost, ok = 0.0, True
    for lk in g.links:
        if blocks and lk.blocks is not None:
            y = math.ceil(mu[lk.id] / lk.blocks.block_capacity - 1e-9) if mu[lk.id] > 1e-12 else 0
            cost += y * lk.blocks.block_cost
            ok &= y <= lk.blocks.max_blocks
        else:
            cost += mu[lk.id] * lk.unit_cost
            if lk.capacitated:
                ok &= mu[lk.id] <= lk.capacity + 1e-9
    if latency and ok:
        cum: dict[str, float] = {}
        for fid in s.topological_order():
            for kid in s.out_commodities(fid):
                k = s.commodity(kid)
                local = 0.0
                for e in routes[kid]:
                    lk = g.links[e]
                    if lk.kind is LinkKind.COMMUNICATION:
                        local += lk.latency
                    elif lk.kind is LinkKind.COMPUTATION_OUT:
                        local += k.processing_delay
                ins = s.input_commodities(kid)
                cum[kid] = local + (max(cum[x] for x in ins) if ins else 0.0)
                if k.latency_bound is not None and s.is_destination_commodity(kid):
                    ok &= cum[kid] <= k.latency_bound + 1e-12
    return cost, ok


def brute_force_optimum(g: AugmentedGraph, s: ServiceGraph, *, info_aware=True, latency=False,
                        blocks=False) -> float:
    """Minimum cost over every placement and every simple-path routing (inf if none is feasible)."""
    procs = [f.id for f in s.functions if f.kind is FunctionKind.PROCESSING]
    fixed = {f.id: g.node_id(f.location) for f in s.functions if f.kind is not FunctionKind.PROCESSING}
    best = math.inf
    path_cache: dict[tuple[int, int], list] = {}
    for combo in itertools.product(*(candidate_nodes(g, s, f) for f in procs)):
        where = dict(fixed)
        where.update(zip(procs, combo))
        options = []
        for k in s.commodities:
            key = (where[k.producer], where[k.consumer])
            if key not in path_cache:
                path_cache[key] = full_paths(g, *key)
            options.append(path_cache[key])
        ids = [k.id for k in s.commodities]
        for choice in itertools.product(*options):
            cost, ok = evaluate(g, s, dict(zip(ids, choice)), info_aware=info_aware, latency=latency, blocks=blocks)
            if ok and cost < best:
                best = cost
    return best


def routing_count(g: AugmentedGraph, s: ServiceGraph) -> int:
    procs = [f.id for f in s.functions if f.kind is FunctionKind.PROCESSING]
    fixed = {f.id: g.node_id(f.location) for f in s.functions if f.kind is not FunctionKind.PROCESSING}
    total = 0
    for combo in itertools.product(*(candidate_nodes(g, s, f) for f in procs)):
        where = dict(fixed)
        where.update(zip(procs, combo))
        total += math.prod(len(full_paths(g, where[k.producer], where[k.consumer])) for k in s.commodities)
    return total


def max_of_bernoullis(rates, probs) -> dict[float, float]:
    """Law of max_i rate_i * X_i for independent X_i ~ Bernoulli(prob_i), by enumerating all outcomes."""
    law: dict[float, float] = {}
    for bits in itertools.product((0, 1), repeat=len(rates)):
        w = 1.0
        for b, q in zip(bits, probs):
            w *= q if b else 1.0 - q
        v = max((r for b, r in zip(bits, rates) if b), default=0.0)
        law[v] = law.get(v, 0.0) + w
    return law
