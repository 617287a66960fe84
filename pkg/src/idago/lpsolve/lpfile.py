"""CPLEX-style LP text export/import and ``name value`` solution files."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParseError
from ..formulation import F, Blocks, LCum, LLocal, LpProblem, Mu, MuObj, Row

_TERMS_PER_LINE = 6


def _num(v: float) -> str:
    if math.isinf(v):
        return "infinity" if v > 0 else "-infinity"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return format(v, ".17g")


def _expr(cols, vals, names) -> list[str]:
    parts = []
    for j, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {names[j]}")
    if not parts:
        return ["0 " + names[0]] if names else ["0"]
    if parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    lines = []
    for i in range(0, len(parts), _TERMS_PER_LINE):
        lines.append(" ".join(parts[i:i + _TERMS_PER_LINE]))
    return lines


def _row_name(i: int, tag: str) -> str:
    return f"r{i}_{re.sub(r'[^A-Za-z0-9_]', '_', tag)}"


def export_lp_file(p: LpProblem) -> str:
    names = p.names()
    out = [f"\\ Problem: {p.name}", "Minimize"]
    nz = np.nonzero(p.c)[0]
    expr = _expr(nz, p.c[nz], names)
    out.append(" obj: " + expr[0])
    out.extend("   " + ln for ln in expr[1:])
    out.append("Subject To")
    for i, r in enumerate(p.rows):
        order = np.argsort(r.cols, kind="stable")
        expr = _expr(r.cols[order], r.vals[order], names)
        rel = {"<=": "<=", ">=": ">=", "=": "="}[r.sense]
        if len(expr) == 1:
            out.append(f" {_row_name(i, r.tag)}: {expr[0]} {rel} {_num(r.rhs)}")
        else:
            out.append(f" {_row_name(i, r.tag)}: {expr[0]}")
            out.extend("   " + ln for ln in expr[1:-1])
            out.append(f"   {expr[-1]} {rel} {_num(r.rhs)}")
    out.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = p.lo[j], p.hi[j]
        if lo == hi:
            out.append(f" {nm} = {_num(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            out.append(f" {nm} free")
        else:
            out.append(f" {_num(lo)} <= {nm} <= {_num(hi)}")
    binaries = [names[j] for j in np.nonzero(p.integer)[0] if p.lo[j] >= 0 and p.hi[j] <= 1]
    generals = [names[j] for j in np.nonzero(p.integer)[0] if not (p.lo[j] >= 0 and p.hi[j] <= 1)]
    out.append("Binary")
    out.extend(" " + nm for nm in binaries)
    if generals:
        out.append("General")
        out.extend(" " + nm for nm in generals)
    out.append("End")
    return "\n".join(out) + "\n"


_KEY_PATTERNS = [
    (re.compile(r"^f_k(\d+)_e(\d+)$"), lambda m: F(int(m[1]), int(m[2]))),
    (re.compile(r"^muo_o(\d+)_e(\d+)$"), lambda m: MuObj(int(m[1]), int(m[2]))),
    (re.compile(r"^mu_e(\d+)$"), lambda m: Mu(int(m[1]))),
    (re.compile(r"^y_e(\d+)$"), lambda m: Blocks(int(m[1]))),
    (re.compile(r"^ll_k(\d+)$"), lambda m: LLocal(int(m[1]))),
    (re.compile(r"^lt_k(\d+)$"), lambda m: LCum(int(m[1]))),
]


@dataclass(frozen=True)
class Named:
    """Variable key for names outside the package's naming scheme."""

    name: str


def key_from_name(name: str):
    for pat, make in _KEY_PATTERNS:
        m = pat.match(name)
        if m:
            return make(m)
    return Named(name)


def _parse_float(tok: str, line: int) -> float:
    t = tok.lower()
    if t in ("infinity", "inf", "+infinity", "+inf"):
        return math.inf
    if t in ("-infinity", "-inf"):
        return -math.inf
    try:
        return float(tok)
    except ValueError:
        raise ParseError(line, f"expected a number, got {tok!r}") from None


_TOKEN = re.compile(r"<=|>=|=<|=>|[<>=]|[+-]|[^\s<>=+-]+")


def read_lp_file(text: str) -> LpProblem:
    """Parse the subset of LP format written by :func:`export_lp_file`."""
    section = None
    objective: list[tuple[int, str]] = []
    constraints: list[tuple[int, str]] = []
    bounds: list[tuple[int, str]] = []
    binary: list[str] = []
    general: list[str] = []
    heads = {"minimize": "obj", "minimum": "obj", "min": "obj", "subject to": "st", "such that": "st",
             "st": "st", "s.t.": "st", "bounds": "bounds", "binary": "bin", "binaries": "bin",
             "general": "gen", "generals": "gen", "end": "end"}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in heads:
            section = heads[low]
            continue
        if section == "obj":
            objective.append((ln, line))
        elif section == "st":
            if re.match(r"^[A-Za-z_][\w.]*:", line) or not constraints:
                constraints.append((ln, line))
            else:
                constraints[-1] = (constraints[-1][0], constraints[-1][1] + " " + line)
        elif section == "bounds":
            bounds.append((ln, line))
        elif section == "bin":
            binary.extend(line.split())
        elif section == "gen":
            general.extend(line.split())
        elif section == "end":
            break
        else:
            raise ParseError(ln, f"text outside any section: {line!r}")

    names: dict[str, int] = {}

    def col(nm: str) -> int:
        if nm not in names:
            names[nm] = len(names)
        return names[nm]

    def linear(tokens: list[str], ln: int) -> dict[int, float]:
        coeffs: dict[int, float] = {}
        sign, coef = 1.0, None
        for tok in tokens:
            if tok in "+-":
                sign = -1.0 if tok == "-" else 1.0
                continue
            try:
                coef = float(tok) if coef is None else coef * float(tok)
                continue
            except ValueError:
                pass
            j = col(tok)
            coeffs[j] = coeffs.get(j, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
        if coef is not None:
            raise ParseError(ln, "dangling coefficient")
        return coeffs

    obj_text = " ".join(t for _, t in objective)
    obj_text = re.sub(r"^[A-Za-z_][\w.]*:\s*", "", obj_text)
    obj = linear(_TOKEN.findall(obj_text), objective[0][0] if objective else 0)
    rows_raw = []
    for ln, line in constraints:
        m = re.match(r"^([A-Za-z_][\w.]*):\s*(.*)$", line)
        name, body = (m[1], m[2]) if m else (f"r{len(rows_raw)}", line)
        toks = _TOKEN.findall(body)
        rel_at = [i for i, t in enumerate(toks) if t in ("<=", ">=", "=<", "=>", "<", ">", "=")]
        if len(rel_at) != 1 or rel_at[0] == len(toks) - 1:
            raise ParseError(ln, f"malformed constraint {line!r}")
        i = rel_at[0]
        rel = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(toks[i], toks[i])
        rhs_toks = toks[i + 1:]
        rhs = _parse_float("".join(rhs_toks), ln)
        coeffs = linear(toks[:i], ln)
        tag = name.split("_", 1)[1].replace("_", "-") if "_" in name else name
        rows_raw.append((coeffs, rel, rhs, tag))
    lo_map: dict[int, float] = {}
    hi_map: dict[int, float] = {}
    for ln, line in bounds:
        toks = line.split()
        if len(toks) == 2 and toks[1].lower() == "free":
            j = col(toks[0])
            lo_map[j], hi_map[j] = -math.inf, math.inf
        elif len(toks) == 3 and toks[1] == "=":
            j = col(toks[0])
            lo_map[j] = hi_map[j] = _parse_float(toks[2], ln)
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            j = col(toks[2])
            lo_map[j], hi_map[j] = _parse_float(toks[0], ln), _parse_float(toks[4], ln)
        elif len(toks) == 3 and toks[1] in ("<=", ">="):
            if toks[1] == ">=":
                j = col(toks[0])
                lo_map[j] = _parse_float(toks[2], ln)
            else:
                j = col(toks[0])
                hi_map[j] = _parse_float(toks[2], ln)
        else:
            raise ParseError(ln, f"malformed bound {line!r}")
    for nm in binary + general:
        col(nm)
    n = len(names)
    c = np.zeros(n)
    for j, v in obj.items():
        c[j] = v
    lo = np.zeros(n)
    hi = np.full(n, math.inf)
    for j, v in lo_map.items():
        lo[j] = v
    for j, v in hi_map.items():
        hi[j] = v
    integer = np.zeros(n, bool)
    for nm in binary:
        j = names[nm]
        integer[j] = True
        if j not in hi_map:
            hi[j] = 1.0
    for nm in general:
        integer[names[nm]] = True
    rows = []
    for coeffs, rel, rhs, tag in rows_raw:
        cols = np.array(sorted(coeffs), dtype=np.int64)
        rows.append(Row(cols, np.array([coeffs[j] for j in cols], float), rel, rhs, tag))
    keys = [key_from_name(nm) for nm in names]
    return LpProblem(keys, c, lo, hi, integer, rows, name="imported")


# ---------------------------------------------------------------------------
# solution files


@dataclass
class PartialAssignment:
    values: dict = field(default_factory=dict)  # variable key (or name) -> value
    warnings: list[str] = field(default_factory=list)

    def vector(self, p: LpProblem, default: float = 0.0) -> np.ndarray:
        x = np.full(p.n_cols, default)
        for key, v in self.values.items():
            if p.has(key):
                x[p.index(key)] = v
        return x


def export_solution(sol) -> str:
    p = sol.problem
    lines = [f"# status {sol.status.value}", f"# objective {_num(sol.objective) if sol.x is not None else 'nan'}"]
    if sol.x is not None:
        for nm, v in zip(p.names(), sol.x):
            lines.append(f"{nm} {format(float(v), '.17g')}")
    return "\n".join(lines) + "\n"


def import_solution(text: str, problem: LpProblem | None = None) -> PartialAssignment:
    """Read ``name value`` lines; names unknown to ``problem`` become warnings."""
    out = PartialAssignment()
    known = dict(zip(problem.names(), problem.variables)) if problem is not None else None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 2:
            raise ParseError(ln, f"expected 'name value', got {raw.strip()!r}")
        name, val = toks
        value = _parse_float(val, ln)
        if not re.match(r"^[A-Za-z_][\w.\[\]@>-]*$", name):
            raise ParseError(ln, f"invalid variable name {name!r}")
        if known is not None and name not in known:
            out.warnings.append(f"line {ln}: unknown variable {name}")
            continue
        out.values[known[name] if known is not None else key_from_name(name)] = value
    return out
