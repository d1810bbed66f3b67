"""A small expression language for vector fields and data functions.

Expressions are immutable trees built by :func:`parse`.  Coordinates are
written ``u<k>`` (flat, 1-based) or ``u<i>_<alpha>`` (in-block index and
block label); any other identifier is a named parameter.  Supported
functions are ``sin cos exp log sqrt abs`` and the two-argument ``pow``.

Derivatives are symbolic (:func:`differentiate`), so :func:`eval_jet`
returns exact partials up to roundoff.  Evaluation compiles a tree to a
Python closure over the generic functions of :mod:`jordanhydro.jet`, which
means a compiled expression accepts floats and jets alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import jet as _j
from .blocks import BlockStructure, MultiIndex
from .jet import DomainError, Jet

__all__ = [
    "Expr",
    "Num",
    "Param",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "ExprError",
    "ParseError",
    "BindError",
    "EvalError",
    "parse",
    "bind",
    "to_text",
    "fold",
    "differentiate",
    "free_variables",
    "parameters",
    "substitute",
    "compile_expr",
    "evaluate",
    "eval_jet",
    "FieldEvaluator",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1, "pow": 2}


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, source: str, pos: int):
        self.offset = len(source[:pos].encode("utf-8"))
        self.source = source
        super().__init__(f"{message} at byte offset {self.offset}: {source!r}")


class BindError(ExprError):
    pass


class EvalError(ExprError, ArithmeticError):
    """Domain failure during evaluation; names the offending subexpression."""

    def __init__(self, message: str, subexpr: str):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{subexpr}'")


# -- tree ---------------------------------------------------------------------


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, slots=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Param(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Var(Expr):
    """A coordinate; ``flat`` is 1-based, or ``(i, alpha)`` before binding."""

    flat: int | None = None
    i: int | None = None
    alpha: int | None = None


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Call(Expr):
    name: str
    args: tuple


ZERO = Num(0.0)
ONE = Num(1.0)


# -- smart constructors (constant folding) ------------------------------------


def _num(v: float) -> Num:
    return Num(float(v))


def _try_numeric(fn, *args):
    try:
        v = fn(*args)
    except (DomainError, ZeroDivisionError, OverflowError, ValueError):
        return None
    if isinstance(v, float) and math.isfinite(v):
        return v
    return None


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return _num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Bin("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return Bin("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Bin("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        v = _try_numeric(lambda x, y: x / y, a.value, b.value)
        if v is not None:
            return _num(v)
    if b == ONE:
        return a
    if a == ZERO and b != ZERO:
        return ZERO
    return Bin("/", a, b)


def pow_(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        v = _try_numeric(_j._real_power, a.value, b.value)
        if v is not None:
            return _num(v)
    if b == ZERO:
        return ONE
    return Bin("^", a, b)


def call(name: str, *args: Expr) -> Expr:
    if all(isinstance(a, Num) for a in args):
        v = _try_numeric(_NUMERIC[name], *(a.value for a in args))
        if v is not None:
            return _num(v)
    return Call(name, tuple(args))


_NUMERIC = {
    "sin": _j.sin,
    "cos": _j.cos,
    "exp": _j.exp,
    "log": _j.log,
    "sqrt": _j.sqrt,
    "abs": _j.fabs,
    "pow": _j.power,
}

_BUILD = {"+": add, "-": sub, "*": mul, "/": div, "^": pow_}


def fold(e: Expr) -> Expr:
    """Constant folding; leaves anything that is not a numeric identity."""
    if isinstance(e, Neg):
        return neg(fold(e.arg))
    if isinstance(e, Bin):
        return _BUILD[e.op](fold(e.left), fold(e.right))
    if isinstance(e, Call):
        return call(e.name, *(fold(a) for a in e.args))
    return e


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),−]))"
)
_FLAT = re.compile(r"u([0-9]+)$")
_ALIAS = re.compile(r"u([0-9]+)_([0-9]+)$")


def _tokenize(src: str):
    pos, out = 0, []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            start = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[start]!r}", src, start)
        kind = m.lastgroup
        text = m.group(kind)
        if text == "−":
            text = "-"
        out.append((kind, text, m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, text: str):
        t = self.take()
        if t[1] != text:
            found = t[1] or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.src, t[2])
        return t

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            arg = self.unary()
            return _num(-arg.value) if isinstance(arg, Num) else Neg(arg)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return _num(float(text))
        if kind == "id":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", self.src, pos)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ParseError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}",
                        self.src, pos)
                return Call(text, tuple(args))
            m = _FLAT.match(text)
            if m:
                return Var(flat=int(m.group(1)))
            m = _ALIAS.match(text)
            if m:
                return Var(i=int(m.group(1)), alpha=int(m.group(2)))
            return Param(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = text or "end of input"
        raise ParseError(f"unexpected {found!r}", self.src, pos)


def parse(src: str, bs: BlockStructure | None = None,
          params: Iterable[str] | None = None) -> Expr:
    """Parse ``src``; with ``bs`` the result is also bound (see :func:`bind`)."""
    if not isinstance(src, str) or not src.strip():
        raise ParseError("empty expression", src if isinstance(src, str) else "", 0)
    p = _Parser(src)
    node = p.expr()
    t = p.peek()
    if t[0] != "end":
        raise ParseError(f"unexpected {t[1]!r}", src, t[2])
    if bs is not None:
        node = bind(node, bs, params)
    return node


def bind(e: Expr, bs: BlockStructure, params: Iterable[str] | None = None) -> Expr:
    """Resolve ``u<i>_<alpha>`` aliases to flat indices and validate names."""
    known = None if params is None else set(params)

    def go(x: Expr) -> Expr:
        if isinstance(x, Var):
            if x.flat is not None:
                if not 1 <= x.flat <= bs.n:
                    raise BindError(f"coordinate u{x.flat} outside 1..{bs.n}")
                return x
            try:
                return Var(flat=bs.flat_index(x.i, x.alpha))
            except IndexError as exc:
                raise BindError(f"coordinate u{x.i}_{x.alpha}: {exc}") from None
        if isinstance(x, Param):
            if known is not None and x.name not in known:
                raise BindError(f"unknown variable or parameter {x.name!r}")
            return x
        if isinstance(x, Neg):
            return Neg(go(x.arg))
        if isinstance(x, Bin):
            return Bin(x.op, go(x.left), go(x.right))
        if isinstance(x, Call):
            return Call(x.name, tuple(go(a) for a in x.args))
        return x

    return go(e)


# -- printing -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(e: Expr, ctx: int = 0) -> str:
    """Render with the minimal parentheses that re-parse to the same tree."""
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        if e.value < 0 or s.startswith("-"):
            return f"({s})" if ctx > 3 else s
        return s
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Var):
        return f"u{e.flat}" if e.flat is not None else f"u{e.i}_{e.alpha}"
    if isinstance(e, Neg):
        s = "-" + to_text(e.arg, 3)
        return f"({s})" if ctx > 3 else s
    if isinstance(e, Bin):
        p = _PREC[e.op]
        if e.op == "^":
            s = f"{to_text(e.left, 5)}^{to_text(e.right, 3)}"
        else:
            s = f"{to_text(e.left, p)}{e.op}{to_text(e.right, p + 1)}"
        return f"({s})" if ctx > p else s
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_text(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


# -- analysis -----------------------------------------------------------------


def _walk(e: Expr):
    yield e
    if isinstance(e, Neg):
        yield from _walk(e.arg)
    elif isinstance(e, Bin):
        yield from _walk(e.left)
        yield from _walk(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _walk(a)


def free_variables(e: Expr, bs: BlockStructure | None = None):
    """Coordinates present after folding: flat indices, or MultiIndex with ``bs``."""
    flat = set()
    for x in _walk(fold(e)):
        if isinstance(x, Var):
            if x.flat is None:
                if bs is None:
                    raise BindError("unbound coordinate alias; pass a BlockStructure")
                flat.add(bs.flat_index(x.i, x.alpha))
            else:
                flat.add(x.flat)
    if bs is None:
        return flat
    return {bs.multi_index(k) for k in flat}


def parameters(e: Expr) -> set[str]:
    return {x.name for x in _walk(e) if isinstance(x, Param)}


def _depends(e: Expr, k: int) -> bool:
    return any(isinstance(x, Var) and x.flat == k for x in _walk(e))


def _var_key(var, bs: BlockStructure | None) -> int:
    if isinstance(var, MultiIndex):
        if bs is None:
            raise BindError("a MultiIndex variable needs a BlockStructure")
        return bs.flat_index(var.i, var.alpha)
    if isinstance(var, str):
        m = _FLAT.match(var)
        if m:
            return int(m.group(1))
        m = _ALIAS.match(var)
        if m and bs is not None:
            return bs.flat_index(int(m.group(1)), int(m.group(2)))
        raise BindError(f"not a coordinate name: {var!r}")
    return int(var)


@lru_cache(maxsize=4096)
def _diff(e: Expr, k: int) -> Expr:
    if isinstance(e, (Num, Param)):
        return ZERO
    if isinstance(e, Var):
        if e.flat is None:
            raise BindError("differentiate needs a bound expression")
        return ONE if e.flat == k else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, k))
    if isinstance(e, Bin):
        a, b = e.left, e.right
        if e.op in "+-":
            return _BUILD[e.op](_diff(a, k), _diff(b, k))
        if e.op == "*":
            return add(mul(_diff(a, k), b), mul(a, _diff(b, k)))
        if e.op == "/":
            return div(sub(mul(_diff(a, k), b), mul(a, _diff(b, k))), pow_(b, Num(2.0)))
        return _diff_pow(a, b, k)
    if isinstance(e, Call):
        a = e.args[0]
        if e.name == "pow":
            return _diff_pow(a, e.args[1], k)
        da = _diff(a, k)
        if da == ZERO:
            return ZERO
        if e.name == "sin":
            return mul(call("cos", a), da)
        if e.name == "cos":
            return neg(mul(call("sin", a), da))
        if e.name == "exp":
            return mul(call("exp", a), da)
        if e.name == "log":
            return div(da, a)
        if e.name == "sqrt":
            return div(da, mul(Num(2.0), call("sqrt", a)))
        if e.name == "abs":
            return mul(div(a, call("abs", a)), da)
    raise TypeError(f"cannot differentiate {e!r}")


def _diff_pow(a: Expr, b: Expr, k: int) -> Expr:
    if not _depends(b, k):
        da = _diff(a, k)
        if da == ZERO:
            return ZERO
        return mul(mul(b, pow_(a, sub(b, ONE))), da)
    return mul(pow_(a, b), add(mul(_diff(b, k), call("log", a)),
                               div(mul(b, _diff(a, k)), a)))


def differentiate(e: Expr, var, bs: BlockStructure | None = None) -> Expr:
    """Exact partial derivative with respect to a coordinate.

    ``var`` is a 1-based flat index, a coordinate name such as ``"u2"``, or a
    :class:`MultiIndex` (which needs ``bs``).
    """
    return _diff(fold(e), _var_key(var, bs))


def substitute(e: Expr, values: Mapping) -> Expr:
    """Replace coordinates (keys: 1-based flat index) or parameters (keys: names)."""

    def lift(v):
        return v if isinstance(v, Expr) else _num(v)

    def go(x: Expr) -> Expr:
        if isinstance(x, Var) and x.flat in values:
            return lift(values[x.flat])
        if isinstance(x, Param) and x.name in values:
            return lift(values[x.name])
        if isinstance(x, Neg):
            return Neg(go(x.arg))
        if isinstance(x, Bin):
            return Bin(x.op, go(x.left), go(x.right))
        if isinstance(x, Call):
            return Call(x.name, tuple(go(a) for a in x.args))
        return x

    return fold(go(e))


# -- evaluation ---------------------------------------------------------------


def _guard(fn, text):
    def run(*args):
        try:
            return fn(*args)
        except (DomainError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(str(exc), text) from None

    return run


def _div(a, b):
    if isinstance(b, (int, float)) and b == 0:
        raise DomainError("division by zero")
    return a / b


_GENERIC = dict(_NUMERIC, div=_div)


def compile_expr(e: Expr, params: Mapping[str, float] | None = None) -> Callable:
    """Compile to ``f(u)`` where ``u`` is a sequence of floats or jets."""
    params = dict(params or {})
    env: dict = {}
    counter = [0]

    def helper(fn, node):
        name = f"_h{counter[0]}"
        counter[0] += 1
        env[name] = _guard(fn, to_text(node))
        return name

    def go(x: Expr) -> str:
        if isinstance(x, Num):
            return repr(x.value)
        if isinstance(x, Param):
            if x.name not in params:
                raise BindError(f"parameter {x.name!r} has no value")
            return repr(float(params[x.name]))
        if isinstance(x, Var):
            if x.flat is None:
                raise BindError("compile needs a bound expression")
            return f"u[{x.flat - 1}]"
        if isinstance(x, Neg):
            return f"(-{go(x.arg)})"
        if isinstance(x, Bin):
            a, b = go(x.left), go(x.right)
            if x.op in "+-*":
                return f"({a} {x.op} {b})"
            fn = _GENERIC["div"] if x.op == "/" else _GENERIC["pow"]
            return f"{helper(fn, x)}({a}, {b})"
        if isinstance(x, Call):
            return f"{helper(_GENERIC[x.name], x)}({', '.join(go(a) for a in x.args)})"
        raise TypeError(f"not an expression: {x!r}")

    body = go(e)
    fn = eval(f"lambda u: {body}", env)  # noqa: S307 - generated from a parsed tree
    text = to_text(e)

    def run(u):
        try:
            return fn(u)
        except IndexError:
            raise EvalError("point has too few coordinates", text) from None

    run.source = text
    return run


def evaluate(e: Expr, point: Sequence, params: Mapping[str, float] | None = None):
    return compile_expr(e, params)(point)


@lru_cache(maxsize=1024)
def _derivative_tables(e: Expr, n: int, order: int):
    grads = tuple(differentiate(e, k + 1) for k in range(n))
    hess = None
    if order >= 2:
        hess = tuple(tuple(differentiate(grads[j], k + 1) for k in range(n)) for j in range(n))
    return grads, hess


def eval_jet(e: Expr, point: Sequence[float], order: int = 1,
             params: Mapping[str, float] | None = None) -> Jet:
    """Value, gradient and Hessian from evaluating symbolic derivative trees."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    u = [float(v) for v in point]
    n = len(u)
    value = evaluate(e, u, params)
    if order == 0:
        return Jet(value)
    grads, hess = _derivative_tables(e, n, order)
    g = np.array([evaluate(d, u, params) for d in grads])
    if order == 1:
        return Jet(value, g)
    H = np.array([[evaluate(d, u, params) for d in row] for row in hess])
    return Jet(value, g, 0.5 * (H + H.T))


class FieldEvaluator:
    """Compiled evaluation of a list of expressions and their partials.

    Point arguments may be floats or order-1 jets; jets are pushed through
    the exact symbolic gradient (chain rule), so derivative information
    seeded upstream survives.
    """

    def __init__(self, exprs: Sequence[Expr], n: int, params: Mapping[str, float] | None = None):
        self.exprs = tuple(exprs)
        self.n = n
        self.params = dict(params or {})
        self._f = [compile_expr(e, self.params) for e in self.exprs]
        d = [[fold(differentiate(e, k + 1)) for k in range(n)] for e in self.exprs]
        self.derivative_exprs = d
        self._df = [[compile_expr(x, self.params) for x in row] for row in d]
        self._ddf = None

    def _second(self):
        if self._ddf is None:
            self._ddf = [
                [[compile_expr(differentiate(x, k + 1), self.params) for k in range(self.n)]
                 for x in row]
                for row in self.derivative_exprs
            ]
        return self._ddf

    def values(self, u: Sequence[float]) -> np.ndarray:
        u = [float(v) for v in u]
        return np.array([f(u) for f in self._f])

    def jacobian(self, u: Sequence[float]) -> np.ndarray:
        u = [float(v) for v in u]
        return np.array([[f(u) for f in row] for row in self._df])

    def hessians(self, u: Sequence[float]) -> np.ndarray:
        u = [float(v) for v in u]
        return np.array([[[f(u) for f in col] for col in row] for row in self._second()])

    def jets(self, u: Sequence[float], order: int = 1) -> list[Jet]:
        """Jets with respect to the coordinates themselves."""
        u = [float(v) for v in u]
        vals = self.values(u)
        if order == 0:
            return [Jet(v) for v in vals]
        J = self.jacobian(u)
        if order == 1:
            return [Jet(vals[a], J[a]) for a in range(len(vals))]
        H = self.hessians(u)
        return [Jet(vals[a], J[a], 0.5 * (H[a] + H[a].T)) for a in range(len(vals))]

    def generic(self, u: Sequence) -> tuple[list, list]:
        """Values and partials evaluated directly on any scalar type."""
        return [f(u) for f in self._f], [[f(u) for f in row] for row in self._df]

    def at(self, u: Sequence) -> tuple[list, list]:
        """Values and partials ``d_k f_a`` at ``u`` (floats, order-1 jets or Taylor)."""
        if any(_j._is_taylor(x) for x in u):
            return self.generic(u)
        seeds = [x for x in u if isinstance(x, Jet) and x.order >= 1]
        if not seeds:
            return list(self.values(u)), [list(r) for r in self.jacobian(u)]
        base = [_j.value_of(x) for x in u]
        G = np.array([x.grad if isinstance(x, Jet) and x.order >= 1 else np.zeros(seeds[0].n)
                      for x in u])
        vals, J, H = self.values(base), self.jacobian(base), self.hessians(base)
        vj = [Jet(vals[a], J[a] @ G) for a in range(len(vals))]
        dj = [[Jet(J[a, k], H[a, k] @ G) for k in range(self.n)] for a in range(len(vals))]
        return vj, dj
