"""DAG-to-forest transformation and its inverse view (collapse).

Walking backward from every destination function, each function that feeds
more than one downstream path is copied once per path, together with its
whole input subtree.  The result is one tree per destination function.
Copies keep their rates and their information object, so copies placed on the
same node, or routed over the same link, are still charged once.

Source functions are shared rather than copied: their location is fixed, so
copying them changes nothing about the optimisation.

Naming: a copy of function ``i`` made for output commodity ``k`` is called
``"i@k"``; a copy of commodity ``l`` consumed by function copy ``c`` is called
``"l@c"``.  Functions and commodities that occur once keep their id, so the
transformation is the identity on services that already are forests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .cloudnet import AugmentedGraph, LinkKind
from .errors import InconsistentEmbedding
from .servicegraph import CommoditySpec, FunctionKind, FunctionSpec, ServiceGraph, require_valid


@dataclass(frozen=True)
class ComponentView:
    index: int
    root: str
    functions: tuple[str, ...]
    commodities: tuple[str, ...]
    source_commodities: tuple[str, ...]
    destination_commodities: tuple[str, ...]


@dataclass(frozen=True)
class ServiceForest:
    service: ServiceGraph
    components: tuple[ComponentView, ...]
    function_origin: Mapping[str, str]
    commodity_origin: Mapping[str, str]
    original: ServiceGraph
    _tree_of: Mapping[str, int] = field(default_factory=dict, repr=False, compare=False)

    @property
    def M(self) -> int:
        return len(self.components)

    def object_of(self, kid: str) -> str:
        return self.service.commodity(kid).obj

    def tree_of(self, kid: str) -> int:
        return self._tree_of[kid]

    def tree_inputs(self, kid: str) -> list[str]:
        """X^T(k) inside the owning tree (identical to X(k) in the forest graph)."""
        return self.service.input_commodities(kid)


def _paths_to_destinations(s: ServiceGraph) -> dict[str, int]:
    n_paths: dict[str, int] = {}
    for fid in reversed(s.topological_order()):
        f = s.function(fid)
        if f.kind is FunctionKind.DESTINATION:
            n_paths[fid] = 1
        else:
            n_paths[fid] = sum(n_paths[s.commodity(k).consumer] for k in s.out_commodities(fid))
    return n_paths


def dag_to_forest(s: ServiceGraph) -> ServiceForest:
    require_valid(s)
    n_paths = _paths_to_destinations(s)

    functions: dict[str, FunctionSpec] = {}
    f_origin: dict[str, str] = {}
    c_origin: dict[str, str] = {}
    commodities: list[CommoditySpec] = []
    components: list[ComponentView] = []
    tree_of: dict[str, int] = {}

    def commodity_copy_id(orig: str, consumer_copy: str) -> str:
        consumer = s.commodity(orig).consumer
        return orig if n_paths[consumer] == 1 else f"{orig}@{consumer_copy}"

    def function_copy_id(orig: str, out_copy: str) -> str:
        f = s.function(orig)
        if f.kind is FunctionKind.SOURCE or n_paths[orig] == 1:
            return orig
        return f"{orig}@{out_copy}"

    for phi, root in enumerate(s.functions_of_kind(FunctionKind.DESTINATION)):
        t_funcs: list[str] = [root]
        t_comms: list[str] = []
        functions.setdefault(root, s.function(root))
        f_origin[root] = root

        def visit(copy_id: str, orig_id: str) -> None:
            for lid in s.in_commodities(orig_id):
                spec = s.commodity(lid)
                lc = commodity_copy_id(lid, copy_id)
                pc = function_copy_id(spec.producer, lc)
                commodities.append(replace(spec, id=lc, producer=pc, consumer=copy_id))
                c_origin[lc] = lid
                tree_of[lc] = phi
                t_comms.append(lc)
                if pc not in functions:
                    functions[pc] = replace(s.function(spec.producer), id=pc)
                    f_origin[pc] = spec.producer
                if pc not in t_funcs:
                    t_funcs.append(pc)
                if s.function(spec.producer).kind is not FunctionKind.SOURCE:
                    visit(pc, spec.producer)

        visit(root, root)
        comm_set = t_comms
        srcs = tuple(k for k in comm_set if s.function(s.commodity(c_origin[k]).producer).kind is FunctionKind.SOURCE)
        dsts = tuple(k for k in comm_set if s.commodity(c_origin[k]).consumer == root)
        components.append(ComponentView(phi, root, tuple(t_funcs), tuple(comm_set), srcs, dsts))

    # keep functions unreachable from any destination (e.g. unused sources) out of the forest
    forest = ServiceGraph(functions.values(), commodities, [o for o in s.objects if any(k.obj == o for k in commodities)])
    return ServiceForest(forest, tuple(components), f_origin, c_origin, s, tree_of)


# ---------------------------------------------------------------------------
# collapse


@dataclass(frozen=True)
class CollapsedEmbedding:
    placements: dict[str, tuple[int, ...]]  # original function -> distinct nodes
    replica_counts: dict[str, int]  # original function -> number of placed replicas
    paths: dict[str, tuple[tuple[int, ...], ...]]  # original commodity -> distinct paths


def _embeddings(forest_embedding) -> Sequence:
    if hasattr(forest_embedding, "chosen"):
        return forest_embedding.chosen
    return list(forest_embedding)


def collapse(f: ServiceForest, forest_embedding) -> CollapsedEmbedding:
    """Merge replicas back onto the original service.

    ``forest_embedding`` is a ForestEmbedding or a sequence of per-tree
    embeddings (objects with ``function_map`` and ``commodity_map``).
    """
    embs = _embeddings(forest_embedding)
    if len(embs) != len(f.components):
        raise InconsistentEmbedding(f"expected {len(f.components)} tree embeddings, got {len(embs)}")
    placements: dict[str, set[int]] = {}
    counts: dict[str, int] = {}
    paths: dict[str, set[tuple[int, ...]]] = {}
    for comp, emb in zip(f.components, embs):
        for fid in comp.functions:
            if fid not in emb.function_map:
                raise InconsistentEmbedding(f"function replica {fid} of tree {comp.index} is not placed")
            orig = f.function_origin[fid]
            placements.setdefault(orig, set()).add(emb.function_map[fid])
            counts[orig] = counts.get(orig, 0) + 1
        for kid in comp.commodities:
            path = emb.commodity_map.get(kid)
            if not path:
                raise InconsistentEmbedding(f"commodity replica {kid} of tree {comp.index} has no path")
            paths.setdefault(f.commodity_origin[kid], set()).add(tuple(path))
    return CollapsedEmbedding(
        {k: tuple(sorted(v)) for k, v in placements.items()},
        counts,
        {k: tuple(sorted(v)) for k, v in paths.items()},
    )


def chaining_violations(c: CollapsedEmbedding, original: ServiceGraph, g: AugmentedGraph) -> list[str]:
    """Replay the chaining semantics of the original DAG on a collapsed embedding.

    Every path of a commodity must start at the emission point of one of its
    producer's placements and end at the ingestion point of one of its
    consumer's placements; whenever a processing function emits a commodity
    from compute node ``p``, every input commodity must reach ``p``.
    """
    out: list[str] = []
    ingress: dict[str, set[int]] = {}  # commodity -> compute nodes / destinations it reaches
    for kid, ps in c.paths.items():
        for path in ps:
            last = g.links[path[-1]]
            ingress.setdefault(kid, set()).add(last.head)
    for kid, ps in c.paths.items():
        spec = original.commodity(kid)
        prod = original.function(spec.producer)
        cons = original.function(spec.consumer)
        for path in ps:
            for a, b in zip(path, path[1:]):
                if g.links[a].head != g.links[b].tail:
                    out.append(f"commodity {kid}: discontiguous path {path}")
            first, last = g.links[path[0]], g.links[path[-1]]
            start = first.tail
            if prod.kind is FunctionKind.SOURCE:
                if first.kind is not LinkKind.SOURCE or g.nodes[start].label != prod.location:
                    out.append(f"commodity {kid}: path does not start at source {prod.location}")
            else:
                if first.kind is not LinkKind.COMPUTATION_OUT or start not in c.placements.get(prod.id, ()):
                    out.append(f"commodity {kid}: path does not start at a placement of {prod.id}")
                for lid in original.input_commodities(kid):
                    if start not in ingress.get(lid, set()):
                        out.append(f"commodity {kid} produced at node {start} without input {lid}")
            end = last.head
            if cons.kind is FunctionKind.DESTINATION:
                if last.kind is not LinkKind.DESTINATION or g.nodes[end].label != cons.location:
                    out.append(f"commodity {kid}: path does not end at destination {cons.location}")
            elif last.kind is not LinkKind.COMPUTATION_IN or end not in c.placements.get(cons.id, ()):
                out.append(f"commodity {kid}: path does not end at a placement of {cons.id}")
    for fid, nodes in c.placements.items():
        fn = original.function(fid)
        if fn.kind is FunctionKind.PROCESSING:
            for p in nodes:
                if not any(any(g.links[path[0]].tail == p for path in c.paths.get(k, ()))
                           for k in original.out_commodities(fid)):
                    out.append(f"function {fid} placed at node {p} emits nothing")
    return out


def forest_as_config_dict(f: ServiceForest) -> dict:
    """Component summary used by the CLI next to the forest service block."""
    return {
        "components": [
            {"index": c.index, "root": c.root, "functions": list(c.functions), "commodities": list(c.commodities)}
            for c in f.components
        ],
        "origin": {
            "functions": dict(f.function_origin),
            "commodities": dict(f.commodity_origin),
        },
    }


def iter_tree_commodities(f: ServiceForest) -> Iterable[tuple[int, str]]:
    for comp in f.components:
        for k in comp.commodities:
            yield comp.index, k
