"""JSON scenario documents: schema validation, model construction, serialization."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import jsonschema
from jsonschema.exceptions import best_match

from ..cloudnet import (AugmentedGraph, BaseNetwork, BlockSpec, CommLinkSpec, ComputeProfile, Endpoint, NodeKind,
                        augment, validate)
from ..errors import IdagoError, SchemaError
from ..formulation import FormulationOptions
from ..lpsolve import SolveBudget
from ..rounding import RoundingParams
from ..servicegraph import (CommoditySpec, FunctionKind, FunctionSpec, Rates, ServiceGraph, scale_commodities,
                            validate_dag)


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("schema.json").read_text())


def _path(parts) -> str:
    out = ""
    for p in parts:
        if isinstance(p, int):
            out += f"[{p}]"
        else:
            out += ("." if out else "") + str(p)
    return out


def _schema_check(doc) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    err = best_match(validator.iter_errors(doc))
    if err is None:
        return
    parts = list(err.absolute_path)
    if err.validator == "required":
        missing = [p for p in err.validator_value if isinstance(err.instance, dict) and p not in err.instance]
        if missing:
            parts.append(missing[0])
    raise SchemaError(_path(parts), err.message)


@dataclass(frozen=True)
class Sweep:
    scales: tuple[float, ...] = (1.0,)
    commodities: tuple[str, ...] = ()


@dataclass
class ScenarioConfig:
    name: str
    graph: AugmentedGraph
    service: ServiceGraph
    sweep: Sweep
    opts: FormulationOptions
    budget: SolveBudget
    rounding: RoundingParams
    document: dict = field(repr=False)

    def __iter__(self):
        return iter((self.graph, self.service, self.sweep, (self.opts, self.budget, self.rounding)))

    def service_at(self, scale: float) -> ServiceGraph:
        if scale == 1.0 or not self.sweep.commodities:
            return self.service
        return scale_commodities(self.service, scale, self.sweep.commodities)


def _cap(v) -> float:
    return math.inf if v == "unbounded" else float(v)


def _blocks(d: dict | None) -> BlockSpec | None:
    if d is None:
        return None
    return BlockSpec(float(d["max_blocks"]), float(d["block_capacity"]), float(d["block_cost"]))


def _rates(d: dict | None, default: float) -> Rates:
    d = d or {}
    return Rates(float(d.get("comm", default)), float(d.get("prod", default)), float(d.get("cons", default)))


_FKIND = {"source": FunctionKind.SOURCE, "destination": FunctionKind.DESTINATION, "processing": FunctionKind.PROCESSING}


def _build_network(net: dict) -> AugmentedGraph:
    node_ids = [n["id"] for n in net["nodes"]]
    seen = set()
    for i, nid in enumerate(node_ids):
        if nid in seen:
            raise SchemaError(f"network.nodes[{i}].id", f"duplicate node id {nid!r}")
        seen.add(nid)
    links = []
    for i, lk in enumerate(net["links"]):
        for end in ("tail", "head"):
            if lk[end] not in seen:
                raise SchemaError(f"network.links[{i}].{end}", f"unknown node {lk[end]!r}")
        links.append(CommLinkSpec(lk["tail"], lk["head"], _cap(lk["capacity"]), float(lk["cost"]),
                                  float(lk.get("latency", 0.0)), _blocks(lk.get("blocks"))))
    profiles = []
    for n in net["nodes"]:
        for c in n.get("compute", ()):
            pr, mem = c["processing"], c["memory"]
            profiles.append(ComputeProfile(
                host=n["id"], proc_capacity=_cap(pr["capacity"]), proc_cost=float(pr["cost"]),
                mem_capacity=_cap(mem["capacity"]), mem_cost=float(mem["cost"]),
                cluster=c.get("cluster", "compute"), kind=c.get("kind", "generic"),
                proc_blocks=_blocks(pr.get("blocks")), mem_blocks=_blocks(mem.get("blocks"))))
    endpoints = []
    for i, ep in enumerate(net.get("endpoints", ())):
        if ep["host"] not in seen:
            raise SchemaError(f"network.endpoints[{i}].host", f"unknown node {ep['host']!r}")
        kind = NodeKind.SOURCE if ep["kind"] == "source" else NodeKind.DESTINATION
        endpoints.append(Endpoint(ep["id"], ep["host"], kind))
    try:
        g = augment(BaseNetwork(tuple(node_ids), tuple(links)), profiles, endpoints)
    except IdagoError as exc:
        raise SchemaError("network", str(exc)) from exc
    problems = validate(g)
    if problems:
        raise SchemaError("network", problems[0])
    return g


def _build_service(svc: dict, g: AugmentedGraph) -> ServiceGraph:
    functions = []
    for i, f in enumerate(svc["functions"]):
        kind = _FKIND[f["kind"]]
        loc = f.get("location")
        if loc is not None and not g.has_label(loc):
            raise SchemaError(f"service.functions[{i}].location", f"unknown endpoint {loc!r}")
        for h in f.get("allowed_hosts", ()):
            if not g.has_label(h):
                raise SchemaError(f"service.functions[{i}].allowed_hosts", f"unknown computation node {h!r}")
        functions.append(FunctionSpec(f["id"], kind, loc, frozenset(f.get("allowed_hosts", ()))))
    fids = {f.id for f in functions}
    commodities = []
    for i, k in enumerate(svc["commodities"]):
        for end in ("producer", "consumer"):
            if k[end] not in fids:
                raise SchemaError(f"service.commodities[{i}].{end}", f"unknown function {k[end]!r}")
        commodities.append(CommoditySpec(
            k["id"], k["producer"], k["consumer"], k["object"], _rates(k["rates"], 0.0),
            _rates(k.get("burstiness"), 1.0), k.get("latency_bound"), float(k.get("processing_delay", 0.0))))
    s = ServiceGraph(functions, commodities, svc.get("objects"))
    problems = validate_dag(s)
    if problems:
        raise SchemaError("service", problems[0])
    return s


def from_document(doc: dict) -> ScenarioConfig:
    _schema_check(doc)
    doc = copy.deepcopy(doc)
    g = _build_network(doc["network"])
    s = _build_service(doc["service"], g)
    sw = doc.get("sweep", {"scales": [1.0]})
    for i, kid in enumerate(sw.get("commodities", ())):
        try:
            s.commodity(kid)
        except KeyError:
            raise SchemaError(f"sweep.commodities[{i}]", f"unknown commodity {kid!r}") from None
    sweep = Sweep(tuple(float(x) for x in sw["scales"]), tuple(sw.get("commodities", ())))
    fo = doc.get("formulation", {})
    opts = FormulationOptions(info_aware=fo.get("info_aware", True), latency_enabled=fo.get("latency", False),
                              resource_blocks=fo.get("resource_blocks", False),
                              burstiness_enabled=fo.get("burstiness", False))
    so = doc.get("solver", {})
    budget = SolveBudget(**{k: so[k] for k in ("max_simplex_iterations", "max_bnb_nodes", "wall_clock_limit",
                                                 "backend") if k in so})
    ro = doc.get("rounding", {})
    rounding = RoundingParams(**{k: ro[k] for k in ("seed", "max_tries", "accept_crf", "accept_latency_relax",
                                                      "selection") if k in ro})
    return ScenarioConfig(doc["name"], g, s, sweep, opts, budget, rounding, doc)


def load(config_text: str) -> ScenarioConfig:
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return from_document(doc)


def save(cfg: ScenarioConfig | dict) -> str:
    doc = cfg.document if isinstance(cfg, ScenarioConfig) else cfg
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# models back to documents


def _num(v: float):
    if math.isinf(v):
        return "unbounded"
    return int(v) if float(v).is_integer() else v


def _blocks_doc(b: BlockSpec | None) -> dict | None:
    if b is None:
        return None
    return {"max_blocks": _num(b.max_blocks), "block_capacity": _num(b.block_capacity), "block_cost": _num(b.block_cost)}


def _rates_doc(r: Rates) -> dict:
    return {"comm": _num(r.comm), "prod": _num(r.prod), "cons": _num(r.cons)}


def network_document(g: AugmentedGraph) -> dict:
    base, profiles, endpoints = g.to_specs()
    nodes = []
    for nid in base.nodes:
        entry: dict = {"id": nid}
        comps = []
        for p in profiles:
            if p.host != nid:
                continue
            proc = {"capacity": _num(p.proc_capacity), "cost": _num(p.proc_cost)}
            mem = {"capacity": _num(p.mem_capacity), "cost": _num(p.mem_cost)}
            if p.proc_blocks:
                proc["blocks"] = _blocks_doc(p.proc_blocks)
            if p.mem_blocks:
                mem["blocks"] = _blocks_doc(p.mem_blocks)
            comps.append({"cluster": p.cluster, "kind": p.kind, "processing": proc, "memory": mem})
        if comps:
            entry["compute"] = comps
        nodes.append(entry)
    links = []
    for lk in base.links:
        d = {"tail": lk.tail, "head": lk.head, "capacity": _num(lk.capacity), "cost": _num(lk.unit_cost)}
        if lk.latency:
            d["latency"] = _num(lk.latency)
        if lk.blocks:
            d["blocks"] = _blocks_doc(lk.blocks)
        links.append(d)
    eps = [{"id": e.label, "host": e.host, "kind": "source" if e.kind is NodeKind.SOURCE else "destination"}
           for e in endpoints]
    return {"nodes": nodes, "links": links, "endpoints": eps}


def service_document(s: ServiceGraph) -> dict:
    inv = {v: k for k, v in _FKIND.items()}
    funcs = []
    for f in s.functions:
        d = {"id": f.id, "kind": inv[f.kind]}
        if f.location is not None:
            d["location"] = f.location
        if f.allowed_hosts:
            d["allowed_hosts"] = sorted(f.allowed_hosts)
        funcs.append(d)
    comms = []
    for k in s.commodities:
        d = {"id": k.id, "producer": k.producer, "consumer": k.consumer, "object": k.obj,
             "rates": _rates_doc(k.rates)}
        if k.burstiness != Rates(1.0, 1.0, 1.0):
            d["burstiness"] = _rates_doc(k.burstiness)
        if k.latency_bound is not None:
            d["latency_bound"] = _num(k.latency_bound)
        if k.processing_delay:
            d["processing_delay"] = _num(k.processing_delay)
        comms.append(d)
    return {"objects": list(s.objects), "functions": funcs, "commodities": comms}


def document_from_models(name: str, g: AugmentedGraph, s: ServiceGraph, sweep: Sweep | None = None) -> dict:
    doc = {"name": name, "network": network_document(g), "service": service_document(s)}
    if sweep is not None:
        doc["sweep"] = {"scales": [_num(x) for x in sweep.scales], "commodities": list(sweep.commodities)}
    return doc
