"""Command-line driver: ``idago <command> --config NAME|PATH [options]``.

Exit codes: 0 success, 1 domain error (one ``error: Reason: message`` line
on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (RandomEmbeddingModel, block_bound, bound_inputs, capacity_bound, latency_bound,
                       theorem2_factors)
from .errors import IdagoError, SchemaError, UnknownScenario
from .formulation import build, flow_matrix, realize
from .lpsolve import SolveBudget, export_lp_file, solve_lp, solve_milp
from .rounding import RoundingParams, capacity_relaxation, idago
from .scenarios import NAMES, BaselineReport, builtin, load, run_baselines
from .scenarios.baselines import METHODS, fmt
from .transform import dag_to_forest

VARIANTS = ("unaware-dag", "aware-dag", "aware-forest")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def load_config(ref: str):
    if ref in NAMES:
        return builtin(ref)
    path = Path(ref)
    if not path.exists() and not ref.endswith(".json"):
        raise UnknownScenario(f"no built-in scenario or file named {ref!r}; built-ins: {', '.join(NAMES)}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(ref, f"cannot read file: {exc.strerror}") from None
    return load(text)


def budget_of(cfg, args) -> SolveBudget:
    b = cfg.budget
    if args.budget_seconds is not None:
        b = replace(b, wall_clock_limit=args.budget_seconds)
    return b


def variant_problem(cfg, variant: str, scale: float, relaxed: bool):
    s = cfg.service_at(scale)
    opts = replace(cfg.opts, relaxed=relaxed)
    if variant == "unaware-dag":
        return build(cfg.graph, s, replace(opts, info_aware=False))
    if variant == "aware-dag":
        return build(cfg.graph, s, opts)
    return build(cfg.graph, dag_to_forest(s).service, opts)


def rounding_params(cfg, args) -> RoundingParams:
    p = cfg.rounding
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    for attr, name in (("tries", "max_tries"), ("accept_crf", "accept_crf"), ("accept_latency", "accept_latency_relax"),
                       ("select", "selection")):
        v = getattr(args, attr, None)
        if v is not None:
            kw[name] = v
    try:
        return replace(p, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_grid(text: str) -> list[float]:
    try:
        parts = [float(x) for x in text.split(":")]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected a:b:step") from None
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise UsageError(f"bad grid {text!r}; expected a:b:step with step > 0")
    a, b, step = parts
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 12) for i in range(n)]


class Table:
    """Rows rendered as CSV or as an aligned text table."""

    def __init__(self, header):
        self.header = list(header)
        self.rows: list[list[str]] = []

    def add(self, *values):
        self.rows.append([v if isinstance(v, str) else fmt(v) if isinstance(v, (float, np.floating)) else str(v)
                          for v in values])

    def render(self, form: str) -> str:
        if form == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.header)
            w.writerows(self.rows)
            return buf.getvalue()
        widths = [max(len(str(x)) for x in col) for col in zip(self.header, *self.rows)]
        lines = ["  ".join(str(v).ljust(n) for v, n in zip(r, widths)).rstrip() for r in [self.header] + self.rows]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_validate(cfg, args) -> str:
    g, s = cfg.graph, cfg.service
    t = Table(["field", "value"])
    t.add("name", cfg.name)
    t.add("communication_nodes", len(g.communication_nodes))
    t.add("computation_nodes", len(g.computation_nodes))
    t.add("links", len(g.links))
    t.add("functions", len(s.functions))
    t.add("commodities", len(s.commodities))
    t.add("objects", len(s.objects))
    t.add("components", len(s.components()))
    t.add("status", "valid")
    return t.render(args.format)


def cmd_transform(cfg, args) -> str:
    f = dag_to_forest(cfg.service_at(args.scale))
    t = Table(["tree", "commodity", "origin", "object", "producer", "consumer"])
    for comp in f.components:
        for kid in comp.commodities:
            k = f.service.commodity(kid)
            t.add(comp.index, kid, f.commodity_origin[kid], k.obj, k.producer, k.consumer)
    head = f"# trees={f.M} commodities={len(f.service.commodities)} objects={len(f.service.objects)}\n"
    return head + t.render(args.format)


def cmd_solve(cfg, args) -> str:
    p = variant_problem(cfg, args.variant, args.scale, relaxed=args.method == "lp")
    b = budget_of(cfg, args)
    sol = solve_lp(p, b) if args.method == "lp" else solve_milp(p, b)
    head = [f"# status={sol.status.value}", f"# objective={fmt(sol.objective)}"]
    if sol.stats.gap is not None:
        head.append(f"# gap={fmt(sol.stats.gap)}")
    t = Table(["variable", "value"])
    if sol.x is not None:
        flows = flow_matrix(p, sol.x)
        if args.method == "milp":
            r = realize(p.context, np.rint(flows))
            head.append(f"# crf={fmt(capacity_relaxation(cfg.graph, r['mu']))}")
        for name, v in zip(p.names(), sol.x):
            if abs(v) > 1e-9:
                t.add(name, float(v))
    return "\n".join(head) + "\n" + t.render(args.format)


def cmd_decompose(cfg, args) -> str:
    res = idago(cfg.graph, cfg.service_at(args.scale), rounding_params(cfg, args), cfg.opts, budget_of(cfg, args))
    g = cfg.graph
    t = Table(["tree", "embedding", "probability", "placement"])
    for dec in res.decs:
        for n, (emb, prob) in enumerate(dec.entries):
            placement = ";".join(f"{fid}@{g.nodes[node].label}" for fid, node in sorted(emb.function_map.items()))
            t.add(dec.tree, n, float(prob), placement)
    head = f"# lp_objective={fmt(res.lp.objective)} sizes={'x'.join(map(str, res.sizes))}\n"
    return head + t.render(args.format)


def cmd_round(cfg, args) -> str:
    params = rounding_params(cfg, args)
    res = idago(cfg.graph, cfg.service_at(args.scale), params, cfg.opts, budget_of(cfg, args))
    t = Table(["attempt", "indices", "cost", "crf", "max_latency_relax", "accepted", "chosen"])
    for c in res.candidates:
        t.add(c.attempt, "-".join(map(str, c.indices)), c.cost, c.crf, c.max_latency_relax,
              "yes" if c.accepted else "no", "yes" if c == res.best_candidate else "no")
    b = res.best_candidate
    head = (f"# sizes={'x'.join(map(str, res.sizes))} exhaustive={'yes' if res.exhaustive else 'no'} "
            f"tries={res.tries_used} best_cost={fmt(b.cost)} best_crf={fmt(b.crf)} "
            f"status={'Accepted' if res.accepted else 'NoAcceptableEmbedding'}\n")
    return head + t.render(args.format)


def _sweep_cell(payload):
    doc, scale, budget = payload
    from .scenarios import from_document

    cfg = from_document(doc)
    rep = run_baselines(cfg, budget, scales=[scale])
    for r in rep.rows:
        r.result = None
    return rep.rows


def _threads() -> int:
    raw = os.environ.get("IDAGO_THREADS", "1") or "1"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"IDAGO_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("IDAGO_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def cmd_sweep(cfg, args) -> str:
    if args.seed is not None:
        cfg = replace(cfg, rounding=replace(cfg.rounding, seed=args.seed))
    budget = budget_of(cfg, args)
    scales = [float(x) for x in args.scales.split(",")] if args.scales else list(cfg.sweep.scales)
    workers = min(_threads(), len(scales))
    if workers > 1:
        doc = dict(cfg.document)
        doc["rounding"] = {**doc.get("rounding", {}), "seed": cfg.rounding.seed}
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(_sweep_cell, [(doc, sc, budget) for sc in scales]) for r in part]
        report = BaselineReport(cfg.name, rows)
    else:
        report = run_baselines(cfg, budget, scales=scales)
    if args.format == "csv":
        return report.to_csv(timings=args.timings)
    t = Table(["method", "scale", "cost", "car", "crf", "max_latency_relax", "status"] +
              (["elapsed_s"] if args.timings else []))
    order = {m: i for i, m in enumerate(METHODS)}
    for r in sorted(report.rows, key=lambda r: (r.scale, order.get(r.method, 99))):
        t.add(r.method, r.scale, r.cost, r.car, r.crf, r.max_latency_relax, r.status,
              *([r.elapsed_s] if args.timings else []))
    return t.render("text")


def cmd_bounds(cfg, args) -> str:
    params = rounding_params(cfg, args)
    res = idago(cfg.graph, cfg.service_at(args.scale), params, cfg.opts, budget_of(cfg, args))
    model = RandomEmbeddingModel.build(res.lp, res.decs, res.forest)
    inputs = bound_inputs(res.lp, res.decs, res.forest, model, n_mc=args.samples, seed=params.seed)
    grid = parse_grid(args.delta_grid)
    g = cfg.graph
    t = Table(["section", "item", "delta", "metric", "value"])

    def guarded(fn):
        try:
            return fn()
        except IdagoError as exc:
            return exc.reason

    for lk in g.links:
        if not lk.capacitated or inputs.active_sum[lk.id] <= 0:
            continue
        item = f"{g.nodes[lk.tail].label}>{g.nodes[lk.head].label}"
        t.add("link", item, "", "xi", float(inputs.xi[lk.id]))
        t.add("link", item, "", "expected_load", float(inputs.expected_nu[lk.id]))
        t.add("link", item, "", "capacity", float(lk.capacity))
        for d in grid:
            t.add("link", item, d, "condition_f", "yes" if inputs.condition_f(lk.id, d) else "no")
            t.add("link", item, d, "capacity_bound", guarded(lambda: capacity_bound(lk.id, d, inputs)))
            if cfg.opts.resource_blocks and lk.blocks is not None:
                t.add("link", item, d, "block_bound", guarded(lambda: block_bound(lk.id, d, inputs)))
                t.add("link", item, d, "block_bound_squared_range",
                      guarded(lambda: block_bound(lk.id, d, inputs, corrected=True)))
    for kid, L in inputs.destination_bounds.items():
        t.add("latency", kid, "", "envelope_max", inputs.lambda_max[kid])
        t.add("latency", kid, "", "envelope_min", inputs.lambda_min[kid])
        t.add("latency", kid, "", "expected", inputs.expected_latency.get(kid, math.nan))
        for d in grid:
            t.add("latency", kid, d, "latency_bound", guarded(lambda: latency_bound(kid, d, inputs)))
    f2 = theorem2_factors(args.theta, inputs)
    for label, fs in (("as_printed", f2.as_printed), ("sign_corrected", f2.sign_corrected)):
        t.add("tries", label, "", "delta_alpha", fs.delta_alpha)
        t.add("tries", label, "", "delta_beta1", fs.delta_beta1)
        t.add("tries", label, "", "delta_beta2", fs.delta_beta2)
        t.add("tries", label, "", "valid", "yes" if fs.valid else "no")
    t.add("tries", "success_probability", "", f"tries={params.max_tries}", f2.success_prob(params.max_tries))
    return t.render(args.format)


def cmd_export_lp(cfg, args) -> str:
    return export_lp_file(variant_problem(cfg, args.variant, args.scale, relaxed=args.method == "lp"))


COMMANDS = {
    "validate": cmd_validate,
    "transform": cmd_transform,
    "solve": cmd_solve,
    "decompose": cmd_decompose,
    "round": cmd_round,
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
    "export-lp": cmd_export_lp,
}


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"{text} must be positive")
        return v
    return conv


def parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="built-in scenario name or path to a JSON document")
    common.add_argument("--seed", type=int, help="rounding seed (overrides the document)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "text"), default="csv")
    common.add_argument("--budget-seconds", type=_positive(float), help="solver wall-clock limit per problem")
    common.add_argument("--timings", action="store_true", help="include wall-clock columns (not reproducible)")
    common.add_argument("--scale", type=_positive(float), default=1.0, help="rate scale applied to the sweep commodities")

    top = argparse.ArgumentParser(prog="idago", description="Information-aware service orchestration pipeline.")
    top.add_argument("--version", action="version", version=f"idago {__version__}")
    sub = top.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("validate", parents=[common], help="check a scenario document")
    sub.add_parser("transform", parents=[common], help="print the forest produced from the service DAG")
    for name, helptext in (("solve", "solve one problem variant"), ("export-lp", "write one variant as an LP file")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--method", choices=("milp", "lp"), default="milp")
        p.add_argument("--variant", choices=VARIANTS, default="aware-forest")
    for name, helptext in (("decompose", "decompose the LP relaxation into embeddings"),
                           ("round", "run randomized rounding"), ("bounds", "tail bounds and approximation factors")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--tries", type=_positive(int))
        p.add_argument("--accept-crf", type=float)
        p.add_argument("--accept-latency", type=float)
        p.add_argument("--select", choices=("first", "best", "lowest"))
        if name == "bounds":
            p.add_argument("--theta", type=float, default=0.5)
            p.add_argument("--delta-grid", default="1.0:2.0:0.1")
            p.add_argument("--samples", type=_positive(int), default=10_000, help="Monte Carlo draws for expectations")
    p = sub.add_parser("sweep", parents=[common], help="four-way comparison over the rate sweep")
    p.add_argument("--scales", help="comma-separated scales (default: the document's sweep)")
    return top


def main(argv=None) -> int:
    ap = parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        text = COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"idago: error: {exc}", file=sys.stderr)
        return 2
    except IdagoError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {exc.reason}: {msg}", file=sys.stderr)
        return 1
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"error: OutputError: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
