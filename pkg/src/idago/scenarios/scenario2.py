"""Scenario 2: duplicated hierarchy, block-priced clusters, three VR services."""

from __future__ import annotations

from .builtin import _bi, _rates

MS = 1e-3

# (max blocks, capacity per block, cost per block)
CORE_EDGE = (100, 50.0, 0.45)
EDGE_EDGE = (100, 50.0, 0.45)
EDGE_ACCESS = (100, 50.0, 0.90)
CLUSTERS = {
    "tracking": ("cpu", (500, 3.4 * 2 * 16, 0.085)),
    "vr": ("cpu", (500, 2.6 * 4 * 64, 0.150)),
    "render": ("gpu", (500, 4825.0, 0.750)),
    "cache": ("memory", (500, 8192.0, 0.054)),
    "gp": ("cpu", (500, 2.6 * 2 * 8, 0.108)),
}

# per service: (name, latency bound in s, content store host, access nodes of its users)
SERVICES = (
    ("A", 50 * MS, "core1", ("a1", "a1", "a2", "a2")),
    ("B", 50 * MS, "core2", ("a5", "a5", "a6", "a6")),
    ("C", 150 * MS, "core1", ("a3", "a3", "a8", "a8")),
)


def _blk(spec) -> dict:
    return {"max_blocks": spec[0], "block_capacity": spec[1], "block_cost": spec[2]}


def _cluster(name: str) -> dict:
    kind, spec = CLUSTERS[name]
    free = {"capacity": "unbounded", "cost": 0}
    priced = {"capacity": spec[0] * spec[1], "cost": 0, "blocks": _blk(spec)}
    if name == "cache":
        return {"cluster": name, "kind": kind, "processing": free, "memory": priced, "assumption": True}
    return {"cluster": name, "kind": kind, "processing": priced, "memory": free, "assumption": True}


def _network() -> dict:
    nodes, links = [], []
    cores, edges = ["core1", "core2"], ["edge1", "edge2", "edge3", "edge4"]
    for n in cores + edges:
        nodes.append({"id": n, "compute": [_cluster(c) for c in ("tracking", "vr", "render", "cache")]})
    for i in range(1, 9):
        nodes.append({"id": f"a{i}", "compute": [_cluster("gp")]})

    def blink(a, b, spec, latency):
        return _bi(a, b, spec[0] * spec[1], 0, latency, _blk(spec))

    for half in (0, 1):
        core, e1, e2 = cores[half], edges[2 * half], edges[2 * half + 1]
        links += blink(core, e1, CORE_EDGE, 20 * MS) + blink(core, e2, CORE_EDGE, 20 * MS)
        links += blink(e1, e2, EDGE_EDGE, 15 * MS)
        for j, e in enumerate((e1, e2)):
            for a in (4 * half + 2 * j + 1, 4 * half + 2 * j + 2):
                links += blink(e, f"a{a}", EDGE_ACCESS, 10 * MS)
    bridge = blink("edge2", "edge3", EDGE_EDGE, 15 * MS)
    for lk in bridge:
        lk["assumption"] = True
    links += bridge
    endpoints = []
    for svc, _, store, users in SERVICES:
        endpoints.append({"id": f"CS_{svc}_src", "host": store, "kind": "source"})
        for i, a in enumerate(users, 1):
            endpoints.append({"id": f"{svc}{i}_sensor", "host": a, "kind": "source"})
            endpoints.append({"id": f"{svc}{i}_display", "host": a, "kind": "destination"})
    return {"nodes": nodes, "links": links, "endpoints": endpoints}


def _hosts(kinds: tuple[str, ...], include_access: bool) -> list[str]:
    out = [f"{n}/{k}" for n in ("core1", "core2", "edge1", "edge2", "edge3", "edge4") for k in kinds]
    if include_access:
        out += [f"a{i}/gp" for i in range(1, 9)]
    return out


def _service() -> tuple[list, list, list]:
    funcs, comms, scaled = [], [], []
    for svc, bound, _, users in SERVICES:
        cs, tr, cache, vr, rd = f"CS_{svc}", f"Tracking_{svc}", f"Cache_{svc}", f"VR_{svc}", f"Render_{svc}"
        funcs += [
            {"id": cs, "kind": "source", "location": f"CS_{svc}_src"},
            {"id": tr, "kind": "processing", "allowed_hosts": _hosts(("tracking",), True)},
            {"id": cache, "kind": "processing", "allowed_hosts": _hosts(("cache",), False)},
            {"id": vr, "kind": "processing", "allowed_hosts": _hosts(("vr",), True)},
            {"id": rd, "kind": "processing", "allowed_hosts": _hosts(("render",), False)},
        ]
        comms.append({"id": f"{cs}>{cache}", "producer": cs, "consumer": cache, "object": f"library_{svc}",
                      "rates": _rates(0, 2, 2800)})
        comms.append({"id": f"{cache}>{vr}", "producer": cache, "consumer": vr, "object": f"assets_{svc}",
                      "rates": _rates(0.025, 50, 800)})
        comms.append({"id": f"{tr}>{vr}", "producer": tr, "consumer": vr, "object": f"pose_{svc}",
                      "rates": _rates(0.625, 17.28, 800)})
        comms.append({"id": f"{vr}>{rd}", "producer": vr, "consumer": rd, "object": f"scene_{svc}",
                      "rates": _rates(2549.75, 120, 148)})
        scaled.append(f"{vr}>{rd}")
        for i in range(1, len(users) + 1):
            src, dst = f"{svc}{i}", f"{svc}{i}_out"
            funcs.append({"id": src, "kind": "source", "location": f"{svc}{i}_sensor"})
            funcs.append({"id": dst, "kind": "destination", "location": f"{svc}{i}_display"})
            comms.append({"id": f"{src}>{tr}", "producer": src, "consumer": tr, "object": f"sensing_{svc}{i}",
                          "rates": _rates(0, 1, 0.65)})
            comms.append({"id": f"{rd}>{dst}", "producer": rd, "consumer": dst, "object": f"frames_{svc}",
                          "rates": _rates(8918.63, 80, 0), "latency_bound": bound, "assumption": True})
            scaled.append(f"{rd}>{dst}")
    return funcs, comms, scaled


def scenario2() -> dict:
    funcs, comms, scaled = _service()
    return {
        "name": "scenario2",
        "description": "Duplicated hierarchy with block-priced clusters and three VR services under latency bounds.",
        "network": _network(),
        "service": {"functions": funcs, "commodities": comms},
        "sweep": {"scales": [1, 2, 4, 6, 8, 10], "commodities": scaled},
        "formulation": {"info_aware": True, "latency": True, "resource_blocks": True, "burstiness": False},
        "solver": {"backend": "auto", "wall_clock_limit": 120},
        "rounding": {"seed": 11, "max_tries": 100, "accept_crf": 1.0, "accept_latency_relax": 1.0,
                     "selection": "best"},
        "notes": [
            "The two halves of the duplicated hierarchy are joined by one edge-to-edge link.",
            "Each service reads its own content store, hosted by the core of the half where most of its "
            "users sit.",
            "Each core and edge node hosts tracking, VR processing, rendering and caching clusters; "
            "each access node hosts one general-purpose cluster.",
            "Block-priced clusters bill one resource: processing for compute clusters and memory for the "
            "caching cluster.  The other resource of each cluster is unbounded and free.",
            "Tracking and VR processing may run on general-purpose clusters; rendering needs a GPU "
            "cluster and caching a caching cluster.",
            "Each service renders one shared scene that is streamed to four user groups, two per access "
            "point, so all rendered streams of a service carry one object.",
            "Not-applicable rates are 0.  Scale multiplies the VR processing and rendering outputs; "
            "burstiness is folded into the scale.",
            "Latencies are in seconds.",
        ],
    }
