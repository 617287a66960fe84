"""Built-in scenario documents.

Scenario 1 uses a five-node hierarchy (core, two edges, two access points)
with proportional costs.  Setting A runs one media service with two user
groups; setting B runs three service instances at once.  Scenario 2 doubles
the topology, switches to resource blocks with public cloud prices and runs
a three-component VR service with latency bounds.

Parameters the source tables leave open are marked ``"assumption": true``
and explained in the ``notes`` list of each document.
"""

from __future__ import annotations

import copy

from ..errors import UnknownScenario
from .config import ScenarioConfig, from_document

NAMES = ("scenario1_a", "scenario1_b", "scenario2")


def _bi(tail: str, head: str, capacity, cost, latency=None, blocks=None, assumption=False) -> list[dict]:
    out = []
    for a, b in ((tail, head), (head, tail)):
        d = {"tail": a, "head": b, "capacity": capacity, "cost": cost}
        if latency is not None:
            d["latency"] = latency
        if blocks is not None:
            d["blocks"] = dict(blocks)
        if assumption:
            d["assumption"] = True
        out.append(d)
    return out


def _compute(capacity, cost, cluster="compute", kind="generic") -> dict:
    return {"cluster": cluster, "kind": kind, "processing": {"capacity": capacity, "cost": cost},
            "memory": {"capacity": capacity, "cost": cost}}


def _rates(prod, comm, cons) -> dict:
    return {"comm": comm, "prod": prod, "cons": cons}


# ---------------------------------------------------------------------------
# scenario 1


def _scenario1_network(sources: list[tuple[str, str]], destinations: list[tuple[str, str]]) -> dict:
    nodes = [
        {"id": "core", "compute": [_compute(600, 5)]},
        {"id": "edge1", "compute": [_compute(500, 10)]},
        {"id": "edge2", "compute": [_compute(500, 12)]},
        {"id": "access1", "compute": [_compute(400, 15)]},
        {"id": "access2", "compute": [_compute(400, 15)]},
    ]
    links = (_bi("core", "edge1", 500, 100) + _bi("core", "edge2", 500, 100) + _bi("edge1", "edge2", 500, 100)
             + _bi("edge1", "access1", 500, 100) + _bi("edge2", "access2", 500, 100))
    endpoints = [{"id": sid, "host": host, "kind": "source"} for sid, host in sources]
    endpoints += [{"id": did, "host": host, "kind": "destination"} for did, host in destinations]
    return {"nodes": nodes, "links": links, "endpoints": endpoints}


_S1_NOTES = [
    "Link latencies are not given for this scenario; all are 0 and latency rows are off.",
    "The content store is a source attached to the core node.",
    "Both Synthesis outputs carry the same information object (the composed experience); "
    "every other commodity carries its own object.",
]


def scenario1_a() -> dict:
    net = _scenario1_network(
        [("gNB1_src", "access1"), ("gNB2_src", "access2"), ("CS_src", "core")],
        [("gNB1_dst", "access1"), ("gNB2_dst", "access2")],
    )
    net["endpoints"][2]["assumption"] = True
    funcs = [
        {"id": "gNB1", "kind": "source", "location": "gNB1_src"},
        {"id": "gNB2", "kind": "source", "location": "gNB2_src"},
        {"id": "CS", "kind": "source", "location": "CS_src"},
        {"id": "Tracking", "kind": "processing"},
        {"id": "Synthesis", "kind": "processing"},
        {"id": "Pers1", "kind": "processing"},
        {"id": "Pers2", "kind": "processing"},
        {"id": "gNB1_out", "kind": "destination", "location": "gNB1_dst"},
        {"id": "gNB2_out", "kind": "destination", "location": "gNB2_dst"},
    ]
    comms = [
        {"id": "gNB1>Tracking", "producer": "gNB1", "consumer": "Tracking", "object": "sensing1",
         "rates": _rates(10, 10, 10)},
        {"id": "gNB2>Tracking", "producer": "gNB2", "consumer": "Tracking", "object": "sensing2",
         "rates": _rates(10, 10, 10)},
        {"id": "CS>Synthesis", "producer": "CS", "consumer": "Synthesis", "object": "content",
         "rates": _rates(10, 10, 10)},
        {"id": "Tracking>Synthesis", "producer": "Tracking", "consumer": "Synthesis", "object": "context",
         "rates": _rates(5, 5, 5)},
        {"id": "Synthesis>Pers1", "producer": "Synthesis", "consumer": "Pers1", "object": "experience",
         "rates": _rates(15, 15, 15), "assumption": True},
        {"id": "Synthesis>Pers2", "producer": "Synthesis", "consumer": "Pers2", "object": "experience",
         "rates": _rates(15, 15, 15), "assumption": True},
        {"id": "Pers1>gNB1", "producer": "Pers1", "consumer": "gNB1_out", "object": "view1",
         "rates": _rates(20, 20, 20)},
        {"id": "Pers2>gNB2", "producer": "Pers2", "consumer": "gNB2_out", "object": "view2",
         "rates": _rates(20, 20, 20)},
    ]
    return {
        "name": "scenario1_a",
        "description": "Five-node hierarchy, one media service, low congestion.",
        "network": net,
        "service": {"functions": funcs, "commodities": comms},
        "sweep": {"scales": list(range(1, 11)),
                  "commodities": ["Synthesis>Pers1", "Synthesis>Pers2", "Pers1>gNB1", "Pers2>gNB2"]},
        "formulation": {"info_aware": True, "latency": False, "resource_blocks": False, "burstiness": False},
        "solver": {"backend": "auto", "wall_clock_limit": 300},
        "rounding": {"seed": 7, "max_tries": 100, "accept_crf": 1.0, "accept_latency_relax": 1.0,
                     "selection": "best"},
        "notes": list(_S1_NOTES),
    }


def scenario1_b() -> dict:
    groups = 3
    access = ["access1", "access2"]
    sources = [("CS_src", "core")]
    dests = []
    for c in range(1, groups + 1):
        sources.append((f"S{c}a_src", access[0]))
        sources.append((f"S{c}b_src", access[1]))
        dests.append((f"U{c}_dst", access[(c - 1) % 2]))
    net = _scenario1_network(sources, dests)
    for ep in net["endpoints"]:
        ep["assumption"] = True
    funcs = [{"id": "CS", "kind": "source", "location": "CS_src"}]
    comms = []
    for c in range(1, groups + 1):
        tr, sy, pe, u = f"Tracking{c}", f"Synthesis{c}", f"Pers{c}", f"User{c}"
        funcs += [
            {"id": f"S{c}a", "kind": "source", "location": f"S{c}a_src"},
            {"id": f"S{c}b", "kind": "source", "location": f"S{c}b_src"},
            {"id": tr, "kind": "processing"},
            {"id": sy, "kind": "processing"},
            {"id": pe, "kind": "processing"},
            {"id": u, "kind": "destination", "location": f"U{c}_dst", "assumption": True},
        ]
        comms += [
            {"id": f"S{c}a>{tr}", "producer": f"S{c}a", "consumer": tr, "object": f"sensing{c}a",
             "rates": _rates(10, 10, 10)},
            {"id": f"S{c}b>{tr}", "producer": f"S{c}b", "consumer": tr, "object": f"sensing{c}b",
             "rates": _rates(10, 10, 10)},
            {"id": f"CS>{sy}", "producer": "CS", "consumer": sy, "object": "content",
             "rates": _rates(10, 10, 10)},
            {"id": f"{tr}>{sy}", "producer": tr, "consumer": sy, "object": f"context{c}",
             "rates": _rates(5, 5, 5)},
            {"id": f"{sy}>{pe}", "producer": sy, "consumer": pe, "object": f"experience{c}",
             "rates": _rates(15, 15, 15)},
            {"id": f"{pe}>{u}", "producer": pe, "consumer": u, "object": f"view{c}",
             "rates": _rates(20, 20, 20)},
        ]
    scaled = [k["id"] for k in comms if k["producer"].startswith(("Synthesis", "Pers"))]
    return {
        "name": "scenario1_b",
        "description": "Scenario 1 network carrying three service instances, high congestion.",
        "network": net,
        "service": {"functions": funcs, "commodities": comms},
        "sweep": {"scales": list(range(1, 11)), "commodities": scaled},
        "formulation": {"info_aware": True, "latency": False, "resource_blocks": False, "burstiness": False},
        "solver": {"backend": "auto", "wall_clock_limit": 300},
        "rounding": {"seed": 7, "max_tries": 100, "accept_crf": 1.0, "accept_latency_relax": 1.0,
                     "selection": "lowest"},
        "notes": list(_S1_NOTES[:2]) + [
            "Each service instance serves one user group through one personalisation stage.",
            "User groups attach to the access nodes round-robin; each instance has one sensor source "
            "on each access node.",
            "The content store is shared by the three instances, so their content streams carry one object.",
        ],
    }


# ---------------------------------------------------------------------------


_BUILDERS = {"scenario1_a": scenario1_a, "scenario1_b": scenario1_b}


def builtin_document(name: str) -> dict:
    if name == "scenario2":
        from .scenario2 import scenario2

        return scenario2()
    try:
        return copy.deepcopy(_BUILDERS[name]())
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(NAMES)}") from None


def builtin(name: str) -> ScenarioConfig:
    return from_document(builtin_document(name))
