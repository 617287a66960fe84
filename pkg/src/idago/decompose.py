"""Split the fractional LP flow of each service tree into weighted embeddings.

Each round places the tree's destination function at its fixed node, then
walks the tree breadth-first toward the sources.  Every commodity gets one
path that carries residual flow of that commodity, traced backward from
where its consumer sits.  The start of that path fixes the producer's
location.  The round's weight is the smallest residual on any mapped
(commodity, link) pair.  That weight is then subtracted along every mapped
path.  Chaining equalities survive the subtraction, so the next round
always finds a path again.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .cloudnet import AugmentedGraph, LinkKind, NodeKind
from .errors import NonConvergence, NoPositivePath
from .formulation import ModelContext, assignment_from_flows, flow_matrix
from .servicegraph import FunctionKind
from .transform import ComponentView

EPS_FLOW = 1e-9
# leftover destination flow below this after a failed path search is solver noise
NOISE_FLOW = 1e-7


@dataclass(frozen=True)
class Embedding:
    tree: int
    function_map: dict  # function id -> node id
    commodity_map: dict  # commodity id -> tuple of link ids

    @property
    def key(self) -> tuple:
        return (tuple(sorted(self.function_map.items())), tuple(sorted(self.commodity_map.items())))

    def __eq__(self, other) -> bool:
        return isinstance(other, Embedding) and self.tree == other.tree and self.key == other.key

    def __hash__(self):
        return hash((self.tree, self.key))

    def indicator(self, ctx: ModelContext) -> np.ndarray:
        """|K| x |E^a| 0/1 matrix of this embedding's commodity flows."""
        out = np.zeros((len(ctx.s.commodities), len(ctx.g.links)))
        for kid, path in self.commodity_map.items():
            out[ctx.k(kid), list(path)] = 1.0
        return out

    def describe(self, g: AugmentedGraph) -> list[str]:
        lines = [f"{fid} -> {g.nodes[n].label}" for fid, n in sorted(self.function_map.items())]
        for kid, path in sorted(self.commodity_map.items()):
            lines.append(f"{kid}: " + " ".join(f"e{e}" for e in path))
        return lines


@dataclass
class Decomposition:
    tree: int
    entries: list  # (Embedding, probability)
    iterations: int = 0
    leftover: float = 0.0  # destination flow left when the loop stopped

    @property
    def N(self) -> int:
        return len(self.entries)

    @property
    def embeddings(self) -> list[Embedding]:
        return [e for e, _ in self.entries]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.entries])

    def reconstruct(self, ctx: ModelContext) -> np.ndarray:
        total = np.zeros((len(ctx.s.commodities), len(ctx.g.links)))
        for emb, p in self.entries:
            total += p * emb.indicator(ctx)
        return total


# ---------------------------------------------------------------------------
# LP flow clean-up


def _cancel_cycles(flow: np.ndarray, g: AugmentedGraph, comm_links: list[int]) -> None:
    """Remove circulations of one commodity over communication links, in place."""
    while True:
        adj: dict[int, list[int]] = {}
        for e in comm_links:
            if flow[e] > EPS_FLOW:
                adj.setdefault(g.links[e].tail, []).append(e)
        cycle = _find_cycle(adj, g)
        if cycle is None:
            return
        flow[cycle] -= flow[cycle].min()
        flow[np.abs(flow) <= EPS_FLOW] = 0.0


def _find_cycle(adj: dict[int, list[int]], g: AugmentedGraph) -> list[int] | None:
    color: dict[int, int] = {}
    for start in sorted(adj):
        if color.get(start):
            continue
        stack = [(start, iter(adj.get(start, ())))]
        via: list[int] = []
        color[start] = 1
        while stack:
            u, it = stack[-1]
            e = next(it, None)
            if e is None:
                color[u] = 2
                stack.pop()
                if via:
                    via.pop()
                continue
            v = g.links[e].head
            c = color.get(v, 0)
            if c == 1:
                nodes = [s[0] for s in stack]
                i = nodes.index(v)
                return via[i:] + [e]
            if c == 0:
                color[v] = 1
                via.append(e)
                stack.append((v, iter(adj.get(v, ()))))
    return None


def clean_flows(ctx: ModelContext, flows: np.ndarray) -> np.ndarray:
    """Clip to the bounds, drop noise and cancel zero-benefit circulations.

    Circulations can appear when a commodity rides on links already paid for
    by another commodity of the same object.  Removing them never increases
    the tight object flows, so an optimal LP solution stays optimal.
    """
    f = np.clip(flows, ctx.lo, ctx.hi)
    f[f <= EPS_FLOW] = 0.0
    comm = ctx.g.links_of_kind(LinkKind.COMMUNICATION)
    for k in range(f.shape[0]):
        _cancel_cycles(f[k], ctx.g, comm)
    return f


def canonical_lp(lp):
    """Copy of an LP solution whose flows are cycle-free and whose auxiliaries are tight."""
    from .lpsolve import LpSolution

    p = lp.problem
    flows = clean_flows(p.context, flow_matrix(p, lp.x))
    x = assignment_from_flows(p, flows)
    return LpSolution(lp.status, p.objective_value(x), x, p, lp.duals, lp.reduced_costs, lp.stats)


# ---------------------------------------------------------------------------
# path extraction


def map_commodity(kid: str, consumer_location: int, residual: np.ndarray, ctx: ModelContext,
                  eps: float = EPS_FLOW) -> tuple[tuple[int, ...], int]:
    """Backward search for a positive-residual path of ``kid`` into its consumer.

    ``consumer_location`` is the consumer's destination node or computation
    node.  At every step the incoming link with the largest residual is tried
    first, ties going to the lowest link id.  Returns the path (tail first)
    and the node where it starts: the producer's source node or computation
    node.
    """
    g = ctx.g
    k = ctx.k(kid)
    r = residual[k]
    end = g.in_links(consumer_location)
    if g.nodes[consumer_location].kind is NodeKind.COMPUTATION:
        end = (g.gadget_links(consumer_location)[0],)
    if len(end) != 1 or r[end[0]] <= eps:
        raise NoPositivePath(f"commodity {kid}: no residual flow into node {g.nodes[consumer_location].label}")
    last = end[0]
    starts = {LinkKind.SOURCE, LinkKind.COMPUTATION_OUT}

    def candidates(u: int) -> list[int]:
        ins = [e for e in g.in_links(u) if r[e] > eps]
        return sorted(ins, key=lambda e: (-r[e], e))

    # iterative DFS over communication nodes
    head = g.links[last].tail
    visited = {head}
    path = [last]
    stack = [iter(candidates(head))]
    while stack:
        e = next(stack[-1], None)
        if e is None:
            stack.pop()
            if len(path) > 1:
                visited.discard(g.links[path[-1]].tail)
                path.pop()
            continue
        link = g.links[e]
        if link.kind in starts:
            path.append(e)
            return tuple(reversed(path)), link.tail
        if link.kind is not LinkKind.COMMUNICATION or link.tail in visited:
            continue
        visited.add(link.tail)
        path.append(e)
        stack.append(iter(candidates(link.tail)))
    raise NoPositivePath(f"commodity {kid}: residual flow does not reach a production point")


def _destination_flow(tree: ComponentView, residual: np.ndarray, ctx: ModelContext) -> float:
    total = 0.0
    for kid in tree.destination_commodities:
        k = ctx.k(kid)
        total += float(residual[k, ctx.g.ingestion_link(ctx.location[ctx.s.commodity(kid).consumer])])
    return total


def decompose_tree(tree: ComponentView, lp, g: AugmentedGraph | None = None, *, eps: float = EPS_FLOW,
                   flows: np.ndarray | None = None) -> Decomposition:
    """Convex combination of valid embeddings reproducing the tree's LP flow."""
    p = lp.problem
    ctx: ModelContext = p.context
    if flows is None:
        flows = flow_matrix(p, lp.x)
    rows = [ctx.k(kid) for kid in tree.commodities]
    residual = np.zeros_like(flows)
    residual[rows] = np.clip(flows[rows], 0.0, None)
    residual[residual <= eps] = 0.0
    cap = int(np.count_nonzero(residual)) + 1
    s = ctx.s
    root_node = ctx.location[tree.root]
    merged: dict[Embedding, float] = {}
    order: list[Embedding] = []
    it = 0
    while _destination_flow(tree, residual, ctx) > eps:
        if it >= cap:
            raise NonConvergence(f"tree {tree.index}: no convergence after {it} rounds")
        it += 1
        fmap = {tree.root: root_node}
        kmap: dict[str, tuple[int, ...]] = {}
        queue = deque([tree.root])
        try:
            while queue:
                j = queue.popleft()
                for kid in s.in_commodities(j):
                    path, start = map_commodity(kid, fmap[j], residual, ctx, eps)
                    kmap[kid] = path
                    producer = s.commodity(kid).producer
                    fmap[producer] = start
                    if s.function(producer).kind is FunctionKind.PROCESSING:
                        queue.append(producer)
        except NoPositivePath:
            left = _destination_flow(tree, residual, ctx)
            if left <= NOISE_FLOW:
                break
            raise
        cells = [(ctx.k(kid), e) for kid, path in kmap.items() for e in path]
        weight = min(residual[k, e] for k, e in cells)
        for k, e in cells:
            residual[k, e] -= weight
            if residual[k, e] <= eps:
                residual[k, e] = 0.0
        emb = Embedding(tree.index, fmap, kmap)
        if emb not in merged:
            order.append(emb)
            merged[emb] = 0.0
        merged[emb] += weight
    dec = Decomposition(tree.index, [(e, merged[e]) for e in order], it, _destination_flow(tree, residual, ctx))
    return dec


def decompose_all(forest, lp, g: AugmentedGraph | None = None) -> list[Decomposition]:
    flows = flow_matrix(lp.problem, lp.x)
    return [decompose_tree(c, lp, g, flows=flows) for c in forest.components]


# ---------------------------------------------------------------------------


def validate_embedding(emb: Embedding, tree: ComponentView, ctx: ModelContext) -> list[str]:
    """Violations of the validity rules for one tree embedding (empty when valid)."""
    g, s = ctx.g, ctx.s
    out: list[str] = []
    for fid in tree.functions:
        f = s.function(fid)
        node = emb.function_map.get(fid)
        if node is None:
            out.append(f"function {fid} unplaced")
            continue
        if f.kind is FunctionKind.PROCESSING:
            if node not in ctx.allowed[fid]:
                out.append(f"function {fid} on disallowed node {g.nodes[node].label}")
        elif node != ctx.location[fid]:
            out.append(f"function {fid} away from its fixed node")
    for kid in tree.commodities:
        path = emb.commodity_map.get(kid)
        if not path:
            out.append(f"commodity {kid} has no path")
            continue
        spec = s.commodity(kid)
        if len(set(path)) != len(path):
            out.append(f"commodity {kid} repeats a link")
        for a, b in zip(path, path[1:]):
            if g.links[a].head != g.links[b].tail:
                out.append(f"commodity {kid} path is not contiguous")
        for e in path[1:-1]:
            if g.links[e].kind is not LinkKind.COMMUNICATION:
                out.append(f"commodity {kid} crosses non-communication link {e}")
        first, last = g.links[path[0]], g.links[path[-1]]
        prod_at = emb.function_map.get(spec.producer)
        cons_at = emb.function_map.get(spec.consumer)
        if first.kind not in (LinkKind.SOURCE, LinkKind.COMPUTATION_OUT) or first.tail != prod_at:
            out.append(f"commodity {kid} does not start at its producer")
        if last.kind not in (LinkKind.DESTINATION, LinkKind.COMPUTATION_IN) or last.head != cons_at:
            out.append(f"commodity {kid} does not end at its consumer")
    return out


def check_decomposition(dec: Decomposition, tree: ComponentView, ctx: ModelContext, flows: np.ndarray) -> dict[str, float]:
    """Numbers behind the completeness check: probability mass, reconstruction error."""
    rows = [ctx.k(k) for k in tree.commodities]
    rec = dec.reconstruct(ctx)
    return {
        "total_probability": float(dec.probabilities.sum()) if dec.entries else 0.0,
        "reconstruction_error": float(np.abs(rec[rows] - flows[rows]).max(initial=0.0)),
        "min_probability": float(dec.probabilities.min()) if dec.entries else math.nan,
    }
