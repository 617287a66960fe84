"""Physical network and the cloud-augmented graph built on top of it.

Every communication node that offers compute gets a gadget: a computation
node ``p`` with a ComputationIn link ``host -> p`` (memory, MB) and a
ComputationOut link ``p -> host`` (processing, Gflops).  Declared source and
destination endpoints become dedicated nodes with a single zero-cost,
unbounded link into / out of their host.  Processing and storage thereby turn
into ordinary capacitated links, so one flow model covers all three resources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import DanglingLinkEndpoint, DuplicateNodeId, NegativeCapacityOrCost

UNBOUNDED = math.inf


class NodeKind(str, Enum):
    COMMUNICATION = "Communication"
    COMPUTATION = "Computation"
    SOURCE = "Source"
    DESTINATION = "Destination"


class LinkKind(str, Enum):
    COMMUNICATION = "Communication"
    COMPUTATION_IN = "ComputationIn"
    COMPUTATION_OUT = "ComputationOut"
    SOURCE = "Source"
    DESTINATION = "Destination"


@dataclass(frozen=True)
class BlockSpec:
    """Discrete resource blocks: at most ``max_blocks`` units of ``block_capacity`` each."""

    max_blocks: float
    block_capacity: float
    block_cost: float

    @property
    def capacity(self) -> float:
        return self.max_blocks * self.block_capacity


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    label: str
    host: int | None = None  # attached communication node (gadgets and endpoints)
    cluster: str | None = None
    cluster_kind: str | None = None


@dataclass(frozen=True)
class Link:
    id: int
    tail: int
    head: int
    kind: LinkKind
    capacity: float
    unit_cost: float
    latency: float = 0.0
    blocks: BlockSpec | None = None

    @property
    def capacitated(self) -> bool:
        return math.isfinite(self.capacity)


# ---------------------------------------------------------------------------
# construction inputs


@dataclass(frozen=True)
class CommLinkSpec:
    tail: str
    head: str
    capacity: float
    unit_cost: float
    latency: float = 0.0
    blocks: BlockSpec | None = None


@dataclass(frozen=True)
class BaseNetwork:
    nodes: tuple[str, ...]
    links: tuple[CommLinkSpec, ...]


@dataclass(frozen=True)
class ComputeProfile:
    """One compute cluster hosted at a communication node."""

    host: str
    proc_capacity: float
    proc_cost: float
    mem_capacity: float
    mem_cost: float
    cluster: str = "compute"
    kind: str = "generic"
    proc_blocks: BlockSpec | None = None
    mem_blocks: BlockSpec | None = None

    @property
    def label(self) -> str:
        return f"{self.host}/{self.cluster}"

    @property
    def has_capacity(self) -> bool:
        return self.proc_capacity > 0 or self.mem_capacity > 0


@dataclass(frozen=True)
class Endpoint:
    label: str
    host: str
    kind: NodeKind  # SOURCE or DESTINATION


# ---------------------------------------------------------------------------


class AugmentedGraph:
    """Immutable cloud-augmented graph with adjacency indexes."""

    def __init__(self, nodes: Sequence[Node], links: Sequence[Link]):
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.links: tuple[Link, ...] = tuple(links)
        n = len(self.nodes)
        ins: list[list[int]] = [[] for _ in range(n)]
        outs: list[list[int]] = [[] for _ in range(n)]
        for link in self.links:
            if 0 <= link.tail < n:
                outs[link.tail].append(link.id)
            if 0 <= link.head < n:
                ins[link.head].append(link.id)
        self._in = tuple(tuple(x) for x in ins)
        self._out = tuple(tuple(x) for x in outs)
        self._by_label: dict[str, int] = {}
        for node in self.nodes:
            self._by_label.setdefault(node.label, node.id)
        self.compute_host: dict[int, int] = {
            nd.id: nd.host for nd in self.nodes if nd.kind is NodeKind.COMPUTATION and nd.host is not None
        }

    # -- lookups -----------------------------------------------------------
    def __repr__(self) -> str:
        return f"AugmentedGraph(|V^a|={len(self.nodes)}, |E^a|={len(self.links)})"

    def node_id(self, label: str) -> int:
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    def has_label(self, label: str) -> bool:
        return label in self._by_label

    def in_links(self, node: int) -> tuple[int, ...]:
        return self._in[node]

    def out_links(self, node: int) -> tuple[int, ...]:
        return self._out[node]

    def nodes_of_kind(self, kind: NodeKind) -> list[int]:
        return [nd.id for nd in self.nodes if nd.kind is kind]

    def links_of_kind(self, kind: LinkKind) -> list[int]:
        return [lk.id for lk in self.links if lk.kind is kind]

    @property
    def communication_nodes(self) -> list[int]:
        return self.nodes_of_kind(NodeKind.COMMUNICATION)

    @property
    def computation_nodes(self) -> list[int]:
        return self.nodes_of_kind(NodeKind.COMPUTATION)

    def gadget_links(self, p: int) -> tuple[int, int]:
        """(ComputationIn link, ComputationOut link) of computation node ``p``."""
        (lin,) = self._in[p]
        (lout,) = self._out[p]
        return lin, lout

    def emission_link(self, s: int) -> int:
        (lk,) = self._out[s]
        return lk

    def ingestion_link(self, q: int) -> int:
        (lk,) = self._in[q]
        return lk

    def signature(self) -> tuple:
        """Label-based structural fingerprint (equal for isomorphic builds)."""
        lab = [nd.label for nd in self.nodes]
        nodes = sorted((nd.label, nd.kind.value, None if nd.host is None else lab[nd.host], nd.cluster, nd.cluster_kind)
                       for nd in self.nodes)
        links = sorted((lab[lk.tail], lab[lk.head], lk.kind.value, lk.capacity, lk.unit_cost, lk.latency, lk.blocks)
                       for lk in self.links)
        return tuple(nodes), tuple(links)

    # -- inverse of augment ------------------------------------------------
    def to_specs(self) -> tuple[BaseNetwork, tuple[ComputeProfile, ...], tuple[Endpoint, ...]]:
        lab = [nd.label for nd in self.nodes]
        comm = tuple(lab[u] for u in self.communication_nodes)
        clinks = tuple(
            CommLinkSpec(lab[lk.tail], lab[lk.head], lk.capacity, lk.unit_cost, lk.latency, lk.blocks)
            for lk in self.links
            if lk.kind is LinkKind.COMMUNICATION
        )
        profiles = []
        for p in self.computation_nodes:
            nd = self.nodes[p]
            lin, lout = (self.links[i] for i in self.gadget_links(p))
            profiles.append(
                ComputeProfile(
                    host=lab[nd.host], proc_capacity=lout.capacity, proc_cost=lout.unit_cost,
                    mem_capacity=lin.capacity, mem_cost=lin.unit_cost, cluster=nd.cluster or "compute",
                    kind=nd.cluster_kind or "generic", proc_blocks=lout.blocks, mem_blocks=lin.blocks,
                )
            )
        endpoints = tuple(
            Endpoint(nd.label, lab[nd.host], nd.kind)
            for nd in self.nodes
            if nd.kind in (NodeKind.SOURCE, NodeKind.DESTINATION)
        )
        return BaseNetwork(comm, clinks), tuple(profiles), endpoints


def _check_nonneg(what: str, capacity: float, cost: float) -> None:
    if capacity < 0 or (isinstance(capacity, float) and math.isnan(capacity)):
        raise NegativeCapacityOrCost(f"{what}: negative capacity {capacity}")
    if cost < 0 or (isinstance(cost, float) and math.isnan(cost)):
        raise NegativeCapacityOrCost(f"{what}: negative cost {cost}")


def augment(
    base_network: BaseNetwork,
    node_profiles: Iterable[ComputeProfile] = (),
    endpoints: Iterable[Endpoint] = (),
) -> AugmentedGraph:
    """Attach compute gadgets and endpoint nodes to ``base_network``.

    Node ids: communication nodes first (declaration order), then one
    computation node per profile with capacity, then endpoints.  Link ids:
    communication links, then (in, out) per gadget, then endpoint links.
    """
    nodes: list[Node] = []
    by_label: dict[str, int] = {}

    def add_node(kind: NodeKind, label: str, **kw) -> int:
        if label in by_label:
            raise DuplicateNodeId(f"duplicate node id {label!r}")
        nid = len(nodes)
        nodes.append(Node(nid, kind, label, **kw))
        by_label[label] = nid
        return nid

    def host_of(label: str, what: str) -> int:
        nid = by_label.get(label)
        if nid is None or nodes[nid].kind is not NodeKind.COMMUNICATION:
            raise DanglingLinkEndpoint(f"{what} references unknown communication node {label!r}")
        return nid

    for label in base_network.nodes:
        add_node(NodeKind.COMMUNICATION, label)

    links: list[Link] = []

    def add_link(tail: int, head: int, kind: LinkKind, cap: float, cost: float, lat: float = 0.0,
                 blocks: BlockSpec | None = None) -> None:
        links.append(Link(len(links), tail, head, kind, float(cap), float(cost), float(lat), blocks))

    for i, spec in enumerate(base_network.links):
        tail = host_of(spec.tail, f"link {i}")
        head = host_of(spec.head, f"link {i}")
        cap = spec.blocks.capacity if spec.blocks is not None else spec.capacity
        _check_nonneg(f"link {i}", cap, spec.unit_cost)
        if spec.blocks is not None:
            _check_nonneg(f"link {i} blocks", spec.blocks.block_capacity, spec.blocks.block_cost)
        if spec.latency < 0:
            raise NegativeCapacityOrCost(f"link {i}: negative latency {spec.latency}")
        add_link(tail, head, LinkKind.COMMUNICATION, cap, spec.unit_cost, spec.latency, spec.blocks)

    for prof in node_profiles:
        host = host_of(prof.host, f"compute profile {prof.label}")
        if not prof.has_capacity and prof.proc_blocks is None and prof.mem_blocks is None:
            continue
        pcap = prof.proc_blocks.capacity if prof.proc_blocks is not None else prof.proc_capacity
        mcap = prof.mem_blocks.capacity if prof.mem_blocks is not None else prof.mem_capacity
        _check_nonneg(f"compute profile {prof.label} (processing)", pcap, prof.proc_cost)
        _check_nonneg(f"compute profile {prof.label} (memory)", mcap, prof.mem_cost)
        p = add_node(NodeKind.COMPUTATION, prof.label, host=host, cluster=prof.cluster, cluster_kind=prof.kind)
        add_link(host, p, LinkKind.COMPUTATION_IN, mcap, prof.mem_cost, 0.0, prof.mem_blocks)
        add_link(p, host, LinkKind.COMPUTATION_OUT, pcap, prof.proc_cost, 0.0, prof.proc_blocks)

    for ep in endpoints:
        host = host_of(ep.host, f"endpoint {ep.label}")
        if ep.kind is NodeKind.SOURCE:
            s = add_node(NodeKind.SOURCE, ep.label, host=host)
            add_link(s, host, LinkKind.SOURCE, UNBOUNDED, 0.0)
        elif ep.kind is NodeKind.DESTINATION:
            q = add_node(NodeKind.DESTINATION, ep.label, host=host)
            add_link(host, q, LinkKind.DESTINATION, UNBOUNDED, 0.0)
        else:
            raise ValueError(f"endpoint {ep.label!r} must be a source or destination, got {ep.kind}")

    return AugmentedGraph(nodes, links)


_LINK_ENDPOINT_KINDS = {
    LinkKind.COMMUNICATION: (NodeKind.COMMUNICATION, NodeKind.COMMUNICATION),
    LinkKind.COMPUTATION_IN: (NodeKind.COMMUNICATION, NodeKind.COMPUTATION),
    LinkKind.COMPUTATION_OUT: (NodeKind.COMPUTATION, NodeKind.COMMUNICATION),
    LinkKind.SOURCE: (NodeKind.SOURCE, NodeKind.COMMUNICATION),
    LinkKind.DESTINATION: (NodeKind.COMMUNICATION, NodeKind.DESTINATION),
}


def validate(g: AugmentedGraph) -> list[str]:
    """Every structural violation of ``g``, node checks first, then links."""
    out: list[str] = []
    n = len(g.nodes)
    seen: dict[str, int] = {}
    for idx, nd in enumerate(g.nodes):
        if nd.id != idx:
            out.append(f"node {idx} has non-dense id {nd.id}")
        if nd.label in seen:
            out.append(f"node {nd.id} duplicates label {nd.label!r} of node {seen[nd.label]}")
        else:
            seen[nd.label] = nd.id
        ins = [g.links[i] for i in g.in_links(nd.id)]
        outs = [g.links[i] for i in g.out_links(nd.id)]
        if nd.kind is NodeKind.COMPUTATION:
            n_out = sum(lk.kind is LinkKind.COMPUTATION_OUT for lk in outs)
            n_in = sum(lk.kind is LinkKind.COMPUTATION_IN for lk in ins)
            if n_out != 1:
                out.append(f"computation node {nd.id} has {n_out} ComputationOut links")
            if n_in != 1:
                out.append(f"computation node {nd.id} has {n_in} ComputationIn links")
            if len(outs) != n_out or len(ins) != n_in:
                out.append(f"computation node {nd.id} has non-gadget links")
            hosts = {lk.head for lk in outs} | {lk.tail for lk in ins}
            if len(hosts) > 1:
                out.append(f"computation node {nd.id} attaches to {len(hosts)} hosts")
            elif hosts and nd.host not in hosts:
                out.append(f"computation node {nd.id} host mismatch")
        elif nd.kind is NodeKind.SOURCE:
            if len(outs) != 1 or ins:
                out.append(f"source node {nd.id} must have exactly one outgoing link and none incoming")
        elif nd.kind is NodeKind.DESTINATION:
            if len(ins) != 1 or outs:
                out.append(f"destination node {nd.id} must have exactly one incoming link and none outgoing")
    for idx, lk in enumerate(g.links):
        if lk.id != idx:
            out.append(f"link {idx} has non-dense id {lk.id}")
        if not (0 <= lk.tail < n and 0 <= lk.head < n):
            out.append(f"link {lk.id} dangling endpoint")
            continue
        if lk.capacity < 0:
            out.append(f"link {lk.id} negative capacity")
        if lk.unit_cost < 0:
            out.append(f"link {lk.id} negative cost")
        if lk.latency < 0:
            out.append(f"link {lk.id} negative latency")
        want_tail, want_head = _LINK_ENDPOINT_KINDS[lk.kind]
        if g.nodes[lk.tail].kind is not want_tail or g.nodes[lk.head].kind is not want_head:
            out.append(f"link {lk.id} of kind {lk.kind.value} joins "
                       f"{g.nodes[lk.tail].kind.value}->{g.nodes[lk.head].kind.value}")
        if lk.kind in (LinkKind.SOURCE, LinkKind.DESTINATION):
            if lk.unit_cost != 0:
                out.append(f"link {lk.id} endpoint link has nonzero cost")
            if lk.capacitated:
                out.append(f"link {lk.id} endpoint link must be unbounded")
        if lk.blocks is not None and lk.blocks.block_capacity < 0:
            out.append(f"link {lk.id} negative block capacity")
    return out
