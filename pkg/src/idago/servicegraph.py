"""Information-aware service DAG: functions, commodities and the object mapping.

A commodity ``k = (i, j)`` is a stream produced by function ``i`` and consumed
by ``j``.  Several commodities may carry the same information object; the
formulation charges a link only once per object, which is where multicast and
replica sharing come from.

Ordering convention: functions and commodities are ordered by declaration
index, and that order is what "ascending id" means throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

from .cloudnet import LinkKind
from .errors import InvalidDag, UnknownCommodity


class FunctionKind(str, Enum):
    SOURCE = "Source"
    DESTINATION = "Destination"
    PROCESSING = "Processing"


@dataclass(frozen=True)
class FunctionSpec:
    id: str
    kind: FunctionKind
    location: str | None = None  # endpoint node label, Source/Destination only
    allowed_hosts: frozenset[str] = frozenset()  # computation node labels; empty means any

    def __post_init__(self):
        object.__setattr__(self, "allowed_hosts", frozenset(self.allowed_hosts))


@dataclass(frozen=True)
class Rates:
    comm: float = 0.0  # Mbps on communication links
    prod: float = 0.0  # Gflops on the producer's ComputationOut link
    cons: float = 0.0  # MB on the consumer's ComputationIn link

    def for_kind(self, kind: LinkKind) -> float:
        if kind is LinkKind.COMMUNICATION:
            return self.comm
        if kind is LinkKind.COMPUTATION_OUT:
            return self.prod
        if kind is LinkKind.COMPUTATION_IN:
            return self.cons
        return 0.0

    def scaled(self, factor: float) -> "Rates":
        return Rates(self.comm * factor, self.prod * factor, self.cons * factor)


UNIT_BURST = Rates(1.0, 1.0, 1.0)


@dataclass(frozen=True)
class CommoditySpec:
    id: str
    producer: str
    consumer: str
    obj: str
    rates: Rates = field(default_factory=Rates)
    burstiness: Rates = UNIT_BURST
    latency_bound: float | None = None
    processing_delay: float = 0.0  # latency charged on the producer's ComputationOut link

    def rate(self, kind: LinkKind, burstiness: bool = False) -> float:
        r = self.rates.for_kind(kind)
        if burstiness:
            r *= self.burstiness.for_kind(kind)
        return r


class ServiceGraph:
    """Immutable service DAG with the derived sets used by the formulation."""

    def __init__(self, functions: Iterable[FunctionSpec], commodities: Iterable[CommoditySpec],
                 objects: Sequence[str] | None = None):
        self.functions: tuple[FunctionSpec, ...] = tuple(functions)
        self.commodities: tuple[CommoditySpec, ...] = tuple(commodities)
        if objects is None:
            objects = list(dict.fromkeys(k.obj for k in self.commodities))
        self.objects: tuple[str, ...] = tuple(objects)
        self._fidx = {}
        for i, f in enumerate(self.functions):
            self._fidx.setdefault(f.id, i)
        self._kidx = {}
        for i, k in enumerate(self.commodities):
            self._kidx.setdefault(k.id, i)
        self._oidx = {o: i for i, o in enumerate(self.objects)}
        ins: dict[str, list[str]] = {f.id: [] for f in self.functions}
        outs: dict[str, list[str]] = {f.id: [] for f in self.functions}
        for k in self.commodities:
            outs.setdefault(k.producer, []).append(k.id)
            ins.setdefault(k.consumer, []).append(k.id)
        self._ins = {f: tuple(v) for f, v in ins.items()}
        self._outs = {f: tuple(v) for f, v in outs.items()}

    def __repr__(self) -> str:
        return f"ServiceGraph(|I|={len(self.functions)}, |K|={len(self.commodities)}, |O|={len(self.objects)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ServiceGraph):
            return NotImplemented
        return (self.functions, self.commodities, self.objects) == (other.functions, other.commodities, other.objects)

    def __hash__(self):
        return hash((self.functions, self.commodities, self.objects))

    # -- lookups -----------------------------------------------------------
    def function(self, fid: str) -> FunctionSpec:
        return self.functions[self._fidx[fid]]

    def has_function(self, fid: str) -> bool:
        return fid in self._fidx

    def commodity(self, kid: str) -> CommoditySpec:
        try:
            return self.commodities[self._kidx[kid]]
        except KeyError:
            raise UnknownCommodity(f"unknown commodity {kid!r}") from None

    def commodity_index(self, kid: str) -> int:
        try:
            return self._kidx[kid]
        except KeyError:
            raise UnknownCommodity(f"unknown commodity {kid!r}") from None

    def object_index(self, obj: str) -> int:
        return self._oidx[obj]

    def in_commodities(self, fid: str) -> tuple[str, ...]:
        return self._ins.get(fid, ())

    def out_commodities(self, fid: str) -> tuple[str, ...]:
        return self._outs.get(fid, ())

    def input_commodities(self, kid: str) -> list[str]:
        """X(k): the commodities consumed by k's producer, in declaration order."""
        k = self.commodity(kid)
        return list(self.in_commodities(k.producer))

    def is_source_commodity(self, kid: str) -> bool:
        return self.function(self.commodity(kid).producer).kind is FunctionKind.SOURCE

    def is_destination_commodity(self, kid: str) -> bool:
        return self.function(self.commodity(kid).consumer).kind is FunctionKind.DESTINATION

    @property
    def source_commodities(self) -> list[str]:
        return [k.id for k in self.commodities if self.is_source_commodity(k.id)]

    @property
    def destination_commodities(self) -> list[str]:
        return [k.id for k in self.commodities if self.is_destination_commodity(k.id)]

    @property
    def processing_commodities(self) -> list[str]:
        return [k.id for k in self.commodities if not self.is_source_commodity(k.id)]

    def functions_of_kind(self, kind: FunctionKind) -> list[str]:
        return [f.id for f in self.functions if f.kind is kind]

    def commodities_of_object(self, obj: str) -> list[str]:
        return [k.id for k in self.commodities if k.obj == obj]

    def topological_order(self) -> list[str]:
        """Kahn's algorithm with declaration-order tie breaking."""
        indeg = {f.id: 0 for f in self.functions}
        for k in self.commodities:
            indeg[k.consumer] = indeg.get(k.consumer, 0) + 1
        ready = [f.id for f in self.functions if indeg[f.id] == 0]
        order: list[str] = []
        while ready:
            ready.sort(key=self._fidx.__getitem__)
            f = ready.pop(0)
            order.append(f)
            for kid in self.out_commodities(f):
                c = self.commodity(kid).consumer
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.functions):
            raise InvalidDag(validate_dag(self))
        return order

    def components(self) -> list[list[str]]:
        """Weakly connected components as lists of function ids."""
        parent = {f.id: f.id for f in self.functions}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k in self.commodities:
            if k.producer in parent and k.consumer in parent:
                a, b = find(k.producer), find(k.consumer)
                if a != b:
                    parent[max(a, b, key=self._fidx.__getitem__)] = min(a, b, key=self._fidx.__getitem__)
        groups: dict[str, list[str]] = {}
        for f in self.functions:
            groups.setdefault(find(f.id), []).append(f.id)
        return list(groups.values())

    def with_commodities(self, commodities: Iterable[CommoditySpec], objects: Sequence[str] | None = None) -> "ServiceGraph":
        return ServiceGraph(self.functions, commodities, objects)


def validate_dag(s: ServiceGraph) -> list[str]:
    """All violations of the service invariants (empty list when valid)."""
    out: list[str] = []
    fids: set[str] = set()
    for f in s.functions:
        if f.id in fids:
            out.append(f"duplicate function {f.id}")
        fids.add(f.id)
    kids: set[str] = set()
    for k in s.commodities:
        if k.id in kids:
            out.append(f"duplicate commodity {k.id}")
        kids.add(k.id)
        for end in (k.producer, k.consumer):
            if end not in fids:
                out.append(f"commodity {k.id} references unknown function {end}")
        if k.producer == k.consumer:
            out.append(f"commodity {k.id} has producer equal to consumer")
        for name in ("comm", "prod", "cons"):
            r = getattr(k.rates, name)
            if r < 0 or math.isnan(r):
                out.append(f"commodity {k.id} negative {name} rate")
            if getattr(k.burstiness, name) < 1:
                out.append(f"commodity {k.id} {name} burstiness below 1")
        if k.processing_delay < 0:
            out.append(f"commodity {k.id} negative processing delay")
        if k.latency_bound is not None:
            cons = k.consumer
            if cons in fids and s.function(cons).kind is not FunctionKind.DESTINATION:
                out.append(f"commodity {k.id} has a latency bound but its consumer is not a destination")
            if k.latency_bound < 0:
                out.append(f"commodity {k.id} negative latency bound")
    for f in s.functions:
        n_in, n_out = len(s.in_commodities(f.id)), len(s.out_commodities(f.id))
        if f.kind is FunctionKind.SOURCE:
            if n_in:
                out.append(f"source function {f.id} has incoming commodities")
            if not f.location:
                out.append(f"source function {f.id} missing fixed location")
        elif f.kind is FunctionKind.DESTINATION:
            if n_out:
                out.append(f"destination function {f.id} has outgoing commodities")
            if not f.location:
                out.append(f"destination function {f.id} missing fixed location")
        else:
            if n_in == 0:
                out.append(f"processing function {f.id} has no input commodities")
            if n_out == 0:
                out.append(f"processing function {f.id} has no output commodities")
    declared = set(s.objects)
    used = {k.obj for k in s.commodities}
    for o in s.objects:
        if o not in used:
            out.append(f"object {o} unmapped")
    for k in s.commodities:
        if k.obj not in declared:
            out.append(f"commodity {k.id} maps to undeclared object {k.obj}")
    cyc = _find_cycle(s)
    if cyc:
        out.append("cycle: " + ",".join(cyc))
    return out


def _find_cycle(s: ServiceGraph) -> list[str] | None:
    order = {f.id: i for i, f in enumerate(s.functions)}
    succ: dict[str, list[str]] = {f.id: [] for f in s.functions}
    for k in s.commodities:
        if k.producer in succ and k.consumer in succ:
            succ[k.producer].append(k.consumer)
    state: dict[str, int] = {}
    stack: list[str] = []

    def dfs(u: str) -> list[str] | None:
        state[u] = 1
        stack.append(u)
        for v in succ[u]:
            if state.get(v) == 1:
                cyc = stack[stack.index(v):]
                m = min(range(len(cyc)), key=lambda i: order[cyc[i]])
                return cyc[m:] + cyc[:m]
            if v not in state:
                found = dfs(v)
                if found:
                    return found
        stack.pop()
        state[u] = 2
        return None

    for f in s.functions:
        if f.id not in state:
            found = dfs(f.id)
            if found:
                return found
    return None


def require_valid(s: ServiceGraph) -> None:
    problems = validate_dag(s)
    if problems:
        raise InvalidDag(problems)


def input_commodities(s: ServiceGraph, kid: str) -> list[str]:
    return s.input_commodities(kid)


def make_info_unaware(s: ServiceGraph) -> ServiceGraph:
    """Give every commodity its own object (the information-unaware baseline)."""
    ks = [replace(k, obj=f"{k.obj}/{k.id}") for k in s.commodities]
    return ServiceGraph(s.functions, ks, [k.obj for k in ks])


def scale_commodities(s: ServiceGraph, factor: float, commodity_ids: Iterable[str]) -> ServiceGraph:
    """Multiply all three rates of the listed commodities by ``factor``."""
    chosen = set(commodity_ids)
    unknown = chosen - {k.id for k in s.commodities}
    if unknown:
        raise UnknownCommodity(f"unknown commodity {sorted(unknown)[0]!r}")
    ks = [replace(k, rates=k.rates.scaled(factor)) if k.id in chosen else k for k in s.commodities]
    return ServiceGraph(s.functions, ks, s.objects)
