"""Run configuration: one TOML file per run.

Blocks are normalized to non-increasing sizes at load time.  Every
coordinate-indexed item (expressions, points, boxes, ``"i(alpha)"`` keys)
is rewritten to the normalized labelling, and the permutation is kept in
:attr:`RunConfig.permutation` so reports can map results back.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .blocks import BlockStructure
from .expr import Expr, ExprError, Var, fold, parse, substitute

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "RunConfig",
    "SolverConfig",
    "CheckConfig",
    "CascadeConfig",
    "MetricConfig",
    "HodographConfig",
    "load_config",
    "parse_config",
]

_KEY = re.compile(r"^\s*(\d+)\s*\(\s*(\d+)\s*\)\s*$")


class ConfigError(ValueError):
    """The configuration is malformed; the CLI maps this to exit code 2."""


@dataclass(frozen=True)
class SolverConfig:
    step: float = 1e-2
    base_point: tuple | None = None
    tol: float = 1e-11


@dataclass(frozen=True)
class CheckConfig:
    points: int = 20
    box: tuple | None = None


@dataclass(frozen=True)
class CascadeConfig:
    targets: tuple
    initial_data: dict
    base_point: tuple


@dataclass(frozen=True)
class MetricConfig:
    targets: tuple
    base_point: tuple
    initial_data: dict = field(default_factory=dict)
    flat_family: dict = field(default_factory=dict)
    eps: float = 3.0
    step: float | None = None


@dataclass(frozen=True)
class GridAxis:
    start: float
    step: float
    count: int

    def values(self) -> list[float]:
        return [self.start + k * self.step for k in range(self.count)]


@dataclass(frozen=True)
class HodographConfig:
    symmetries: tuple          # (label, exprs) pairs; the flow itself is label "t"
    times: dict
    vary: str
    x: GridAxis
    t: GridAxis
    u_guess: tuple
    region: tuple | None = None
    convergence_h: float = 0.02
    convergence_size: int = 11


@dataclass(frozen=True)
class RunConfig:
    name: str
    blocks: tuple
    permutation: tuple         # normalized block b is the configured block permutation[b-1]
    parameters: dict
    vector_field: tuple
    solver: SolverConfig
    check: CheckConfig
    symmetries: CascadeConfig | None = None
    conservation: CascadeConfig | None = None
    metric: MetricConfig | None = None
    hodograph: HodographConfig | None = None
    jb3: dict = field(default_factory=dict)
    source: str = ""

    @property
    def bs(self) -> BlockStructure:
        return BlockStructure(self.blocks)

    def summary(self) -> dict:
        return {"name": self.name, "blocks": list(self.blocks),
                "block_permutation": list(self.permutation),
                "parameters": dict(self.parameters),
                "vector_field": [str(e) for e in self.vector_field]}


# -- helpers ----------------------------------------------------------------


class _Relabel:
    """Maps configured coordinates and block labels to the normalized ones."""

    def __init__(self, blocks):
        try:
            self.old = BlockStructure(blocks)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"blocks: {exc}") from None
        self.new, self.perm = self.old.sorted()
        self.block = {old: new for new, old in enumerate(self.perm, start=1)}
        self.flat = {}
        for k in self.old.indices():
            self.flat[self.old.flat_index(k.i, k.alpha)] = self.new.flat_index(k.i, self.block[k.alpha])
        self.trivial = all(a == b for a, b in self.flat.items())

    def expr(self, e: Expr) -> Expr:
        if self.trivial:
            return e
        return fold(substitute(e, {a: Var(flat=b) for a, b in self.flat.items()}))

    def vector(self, v, where: str) -> tuple:
        v = _floats(v, where)
        if len(v) != self.old.n:
            raise ConfigError(f"{where}: expected {self.old.n} coordinates, got {len(v)}")
        out = [0.0] * self.old.n
        for a, b in self.flat.items():
            out[b - 1] = v[a - 1]
        return tuple(out)

    def components(self, items, where: str) -> list:
        """A per-coordinate list (e.g. vector-field components) in normalized order."""
        if len(items) != self.old.n:
            raise ConfigError(f"{where}: expected {self.old.n} components, got {len(items)}")
        out = [None] * self.old.n
        for a, b in self.flat.items():
            out[b - 1] = items[a - 1]
        return out

    def key(self, text: str, where: str) -> tuple[int, int]:
        m = _KEY.match(str(text))
        if not m:
            raise ConfigError(f"{where}: key {text!r} is not of the form 'i(alpha)'")
        i, a = int(m.group(1)), int(m.group(2))
        if not 1 <= a <= self.old.r or not 1 <= i <= self.old.size(a):
            raise ConfigError(f"{where}: unknown {text!r} does not exist for blocks "
                              f"{list(self.old.sizes)}")
        return i, self.block[a]


def _floats(v, where: str) -> list[float]:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{where}: expected a list of numbers")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{where}: {x!r} is not a number")
        if not math.isfinite(float(x)):
            raise ConfigError(f"{where}: {x!r} is not finite")
        out.append(float(x))
    return out


def _number(table: Mapping, key: str, where: str, default=None, positive=False) -> float:
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}: missing {key!r}")
        return default
    x = table[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(float(x)):
        raise ConfigError(f"{where}.{key}: {x!r} is not a finite number")
    if positive and not x > 0:
        raise ConfigError(f"{where}.{key}: must be positive")
    return float(x)


def _integer(table: Mapping, key: str, where: str, default: int) -> int:
    x = table.get(key, default)
    if isinstance(x, bool) or not isinstance(x, int) or x < 1:
        raise ConfigError(f"{where}.{key}: expected a positive integer, got {x!r}")
    return x


def _table(raw: Mapping, key: str, where: str = "") -> dict | None:
    t = raw.get(key)
    if t is None:
        return None
    if not isinstance(t, dict):
        raise ConfigError(f"{where}{key}: expected a table")
    return t


class _Parser:
    def __init__(self, relabel: _Relabel, params: Mapping[str, float]):
        self.r = relabel
        self.params = dict(params)

    def expr(self, text, where: str) -> Expr:
        if not isinstance(text, str):
            raise ConfigError(f"{where}: expressions must be quoted strings, got {text!r}")
        try:
            tree = parse(text, self.r.old, self.params)
        except ExprError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        return self.r.expr(tree)

    def vector(self, v, where):
        return self.r.vector(v, where)

    def points(self, v, where) -> tuple:
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{where}: expected a non-empty list of points")
        return tuple(self.vector(p, f"{where}[{k}]") for k, p in enumerate(v))

    def keyed(self, table, where) -> dict:
        """``"i(alpha)" = "expr"`` entries, keyed by normalized ``(i, alpha)``."""
        if not isinstance(table, dict):
            raise ConfigError(f"{where}: expected a table")
        return {self.r.key(k, where): self.expr(v, f"{where}.{k!r}") for k, v in table.items()}


# -- sections ---------------------------------------------------------------


def _cascade(p: _Parser, t: dict, name: str, base) -> CascadeConfig:
    data = p.keyed(t.get("initial_data", {}), f"{name}.initial_data")
    missing = [k for k in p.r.new.indices() if (k.i, k.alpha) not in data]
    if missing:
        raise ConfigError(f"{name}.initial_data: no data for {', '.join(map(str, missing))}")
    bp = p.vector(t["base_point"], f"{name}.base_point") if "base_point" in t else base
    if bp is None:
        raise ConfigError(f"{name}: no base_point (set it here or in [solver])")
    return CascadeConfig(p.points(t.get("targets"), f"{name}.targets"), data, bp)


def _metric(p: _Parser, t: dict, base) -> MetricConfig:
    ff = t.get("flat_family", {})
    if not isinstance(ff, dict):
        raise ConfigError("metric.flat_family: expected a table")
    need = ("F1", "F4", "F5", "F6", "F7")
    if ff and sorted(ff) != sorted(need):
        raise ConfigError(f"metric.flat_family: expected exactly the keys {', '.join(need)}")
    flat = {k: p.expr(v, f"metric.flat_family.{k}") for k, v in ff.items()}
    data = p.keyed(t.get("initial_data", {}), "metric.initial_data")
    if not flat and not data:
        raise ConfigError("metric: give either flat_family or initial_data")
    if flat and p.r.new.sizes != (3,):
        raise ConfigError("metric.flat_family is defined for blocks = [3]")
    bp = p.vector(t["base_point"], "metric.base_point") if "base_point" in t else base
    if bp is None:
        raise ConfigError("metric: no base_point (set it here or in [solver])")
    step = _number(t, "step", "metric", positive=True) if "step" in t else None
    return MetricConfig(p.points(t.get("targets"), "metric.targets"), bp, data, flat,
                        _number(t, "eps", "metric", 3.0), step)


def _axis(t, key) -> GridAxis:
    a = _table(t, key, "hodograph.")
    if a is None:
        raise ConfigError(f"hodograph: missing table {key!r}")
    w = f"hodograph.{key}"
    return GridAxis(_number(a, "start", w), _number(a, "step", w, positive=True),
                    _integer(a, "count", w, 1))


def _hodograph(p: _Parser, t: dict) -> HodographConfig:
    entries = t.get("symmetry", [])
    if not isinstance(entries, list):
        raise ConfigError("hodograph.symmetry: expected an array of tables")
    syms = []
    for k, s in enumerate(entries):
        w = f"hodograph.symmetry[{k}]"
        if not isinstance(s, dict) or "label" not in s or "components" not in s:
            raise ConfigError(f"{w}: needs 'label' and 'components'")
        comps = s["components"]
        if not isinstance(comps, list):
            raise ConfigError(f"{w}.components: expected a list of expressions")
        comps = p.r.components(comps, f"{w}.components")
        syms.append((str(s["label"]), tuple(p.expr(c, f"{w}.components") for c in comps)))
    labels = ["t"] + [s[0] for s in syms]
    if len(set(labels)) != len(labels):
        raise ConfigError("hodograph.symmetry: labels must be distinct and differ from 't'")
    times = t.get("times", {})
    if not isinstance(times, dict):
        raise ConfigError("hodograph.times: expected a table label -> number")
    for k in times:
        if k not in labels:
            raise ConfigError(f"hodograph.times: unknown symmetry label {k!r}")
    times = {k: _number(times, k, "hodograph.times") for k in times}
    vary = str(t.get("vary", "t"))
    if vary not in labels:
        raise ConfigError(f"hodograph.vary: unknown symmetry label {vary!r}")
    region = None
    if "region" in t:
        lo = p.vector([r[0] for r in t["region"]], "hodograph.region")
        hi = p.vector([r[1] for r in t["region"]], "hodograph.region")
        region = tuple(zip(lo, hi))
    conv = _table(t, "convergence", "hodograph.") or {}
    return HodographConfig(
        tuple(syms), times, vary, _axis(t, "x"), _axis(t, "t"),
        p.vector(t.get("u_guess"), "hodograph.u_guess"), region,
        _number(conv, "h", "hodograph.convergence", 0.02, positive=True),
        _integer(conv, "size", "hodograph.convergence", 11))


# -- entry points -----------------------------------------------------------


def parse_config(raw: Mapping[str, Any], source: str = "") -> RunConfig:
    if "blocks" not in raw:
        raise ConfigError("missing 'blocks'")
    blocks = raw["blocks"]
    if not isinstance(blocks, list) or not all(isinstance(m, int) and not isinstance(m, bool)
                                               for m in blocks):
        raise ConfigError("blocks: expected a list of integers")
    relabel = _Relabel(blocks)
    params_raw = _table(raw, "parameters") or {}
    params = {k: _number(params_raw, k, "parameters") for k in params_raw}
    p = _Parser(relabel, params)

    vf = raw.get("vector_field")
    if not isinstance(vf, list):
        raise ConfigError("vector_field: expected a list of expressions")
    vf = relabel.components(vf, "vector_field")
    X = tuple(p.expr(s, f"vector_field[{k}]") for k, s in enumerate(vf))

    st = _table(raw, "solver") or {}
    base = p.vector(st["base_point"], "solver.base_point") if "base_point" in st else None
    solver = SolverConfig(_number(st, "step", "solver", 1e-2, positive=True), base,
                          _number(st, "tol", "solver", 1e-11, positive=True))

    ct = _table(raw, "check") or {}
    box = None
    if "box" in ct:
        bx = ct["box"]
        if not isinstance(bx, list) or not all(isinstance(r, list) and len(r) == 2 for r in bx):
            raise ConfigError("check.box: expected [[lo, hi], ...]")
        lo = relabel.vector([r[0] for r in bx], "check.box")
        hi = relabel.vector([r[1] for r in bx], "check.box")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError("check.box: every interval needs lo < hi")
        box = tuple(zip(lo, hi))
    check = CheckConfig(_integer(ct, "points", "check", 20), box)

    sections = {}
    for name in ("symmetries", "conservation"):
        t = _table(raw, name)
        sections[name] = None if t is None else _cascade(p, t, name, base)
    mt = _table(raw, "metric")
    metric = None if mt is None else _metric(p, mt, base)
    ht = _table(raw, "hodograph")
    hodo = None if ht is None else _hodograph(p, ht)
    jt = _table(raw, "jb3") or {}
    jb3 = {}
    if jt:
        if relabel.new.sizes != (3,):
            raise ConfigError("jb3: this section needs blocks = [3]")
        for k, v in jt.items():
            if isinstance(v, list):
                jb3[k] = tuple(p.expr(s, f"jb3.{k}[{j}]") for j, s in enumerate(v))
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                jb3[k] = float(v)
            else:
                jb3[k] = p.expr(v, f"jb3.{k}")

    return RunConfig(
        name=str(raw.get("name", "run")), blocks=relabel.new.sizes, permutation=relabel.perm,
        parameters=params, vector_field=X, solver=solver, check=check,
        symmetries=sections["symmetries"], conservation=sections["conservation"],
        metric=metric, hodograph=hodo, jb3=jb3, source=source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, source=str(path))
