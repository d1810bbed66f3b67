"""Symmetries and conservation laws of Darboux-Tsarev systems.

Both linear problems become Pfaffian cascades in canonical coordinates.
Symmetries ``Y`` solve ``d_nabla(Y o) = 0``; layer ``i`` holds the
components ``Y^{i(alpha)}`` and is solved from ``i = 1`` upwards.
Gradients ``omega = dh`` of conserved densities solve
``d_j omega_i = Gamma^s_{ji} omega_s + c^s_{ij} e^t nabla_s omega_t``;
layer ``i`` holds ``omega_{i(alpha)}`` and is solved from the top down.
Each unknown is free along ``u^{1(alpha)}`` of its own block.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .blocks import BlockStructure
from .connection import DefiningField, christoffel_at, dnabla_residual
from .darboux import InitialData, PfaffianSystem, Solution, integrate
from .expr import (Expr, FieldEvaluator, Num, add, differentiate, div, fold, free_variables,
                   mul, neg, parse, sub, substitute)
from .jet import exp, value_of
from .taylor import Taylor

__all__ = [
    "symmetry_label",
    "omega_label",
    "symmetry_system",
    "conservation_system",
    "solve_symmetry",
    "solve_conservation",
    "symmetry_residual",
    "closedness_residual",
    "density_residual",
    "hessian_density_residual",
    "ClosednessError",
    "potential_of",
    "semisimple_conservation_rhs",
    "adaptive_simpson",
    "jb3_symmetry_oracle",
    "jb3_symmetry_data",
    "jb3_omega",
    "jb3_omega_exprs",
    "jb3_omega_data",
    "jb3_potential",
]


def symmetry_label(i: int, alpha: int) -> str:
    return f"Y^{i}({alpha})"


def omega_label(i: int, alpha: int) -> str:
    return f"omega_{i}({alpha})"


# -- symmetry cascade -------------------------------------------------------


def symmetry_system(df: DefiningField) -> PfaffianSystem:
    """The symmetry cascade of a Darboux-Tsarev field."""
    df.require_darboux_tsarev()
    bs = df.bs
    L = symmetry_label
    rhs: dict = {}

    def sameblock(i, a, k):
        p1 = bs.pos(1, a) + 1
        top = i - k + 1
        m = bs.size(a)

        # Gamma^{i}_{jk} vanishes for i < max(j, k), so only s <= i contributes
        def f(fr):
            G = fr.gamma()
            acc = fr.d(L(top, a), p1) if top >= 1 else 0.0
            for s in range(2, min(i, m) + 1):
                c = -G[bs.pos(i, a)][bs.pos(k, a)][bs.pos(s, a)]
                if s <= top:
                    c = c + G[bs.pos(top, a)][bs.pos(1, a)][bs.pos(s, a)]
                acc = acc + c * fr.w[L(s, a)]
            return acc

        return f

    def distinct(i, a, j, b):
        def f(fr):
            G = fr.gamma()
            row = G[bs.pos(i, a)][bs.pos(j, b)]
            acc = 0.0
            for s in range(1, i + 1):
                acc = acc - row[bs.pos(s, a)] * fr.w[L(s, a)]
            for s in range(1, min(bs.size(b) - j + 1, i) + 1):
                acc = acc - row[bs.pos(s, b)] * fr.w[L(s, b)]
            return acc

        return f

    for a in range(1, bs.r + 1):
        for i in range(1, bs.size(a) + 1):
            for k in range(2, bs.size(a) + 1):
                rhs[(L(i, a), bs.flat_index(k, a))] = sameblock(i, a, k)
            for b in range(1, bs.r + 1):
                if b != a:
                    for j in range(1, bs.size(b) + 1):
                        rhs[(L(i, a), bs.flat_index(j, b))] = distinct(i, a, j, b)
    layers = tuple(tuple(L(i, a) for a in range(1, bs.r + 1) if bs.size(a) >= i)
                   for i in range(1, max(bs.sizes) + 1))
    unknowns = tuple(L(k.i, k.alpha) for k in bs.indices())
    return PfaffianSystem(bs, unknowns, rhs, df, layers, None, "symmetries")


def solve_symmetry(df: DefiningField, data: InitialData, target: Sequence[float],
                   step: float = 1e-2) -> tuple[np.ndarray, Solution]:
    sys = symmetry_system(df)
    sol = integrate(sys, data, target, step)
    Y = np.array([sol.values[symmetry_label(k.i, k.alpha)] for k in df.bs.indices()])
    return Y, sol


def symmetry_residual(df: DefiningField, sol: Solution) -> float:
    """``d_nabla(Y o)`` at the solution point from the integrated values and partials."""
    bs = df.bs
    labels = [symmetry_label(k.i, k.alpha) for k in bs.indices()]
    Y = np.array([sol.values[a] for a in labels])
    dY = np.array([sol.grad(a) for a in labels])
    gamma = np.array(christoffel_at(df, list(sol.target)), dtype=float)
    return dnabla_residual(bs, gamma, Y, dY)


# -- conservation cascade ---------------------------------------------------


def conservation_system(df: DefiningField) -> PfaffianSystem:
    """The cascade for gradients of conserved densities."""
    df.require_darboux_tsarev()
    bs = df.bs
    n = bs.n
    L = omega_label
    labels = [L(k.i, k.alpha) for k in bs.indices()]
    rhs: dict = {}

    def linear(pj, pi):
        # Gamma^s_{ji} vanishes unless the in-block index of s is >= those of j and i
        low = max(bs.index_in_block[pj], bs.index_in_block[pi])
        terms = [s for s in range(n) if bs.index_in_block[s] >= low]

        def acc_of(fr):
            G = fr.gamma()
            acc = 0.0
            for s in terms:
                acc = acc + G[s][pj][pi] * fr.w[labels[s]]
            return acc

        return acc_of

    def sameblock(i, a, j):
        base = linear(bs.pos(j, a), bs.pos(i, a))
        top = i + j - 1

        def f(fr):
            acc = base(fr)
            if top <= bs.size(a):
                for b in range(1, bs.r + 1):
                    acc = acc + fr.d(L(top, a), bs.flat_index(1, b))
            return acc

        return f

    for a in range(1, bs.r + 1):
        for i in range(1, bs.size(a) + 1):
            for j in range(2, bs.size(a) + 1):
                rhs[(L(i, a), bs.flat_index(j, a))] = sameblock(i, a, j)
            for b in range(1, bs.r + 1):
                if b != a:
                    for j in range(1, bs.size(b) + 1):
                        rhs[(L(i, a), bs.flat_index(j, b))] = linear(bs.pos(j, b), bs.pos(i, a))
    layers = tuple(tuple(L(i, a) for a in range(1, bs.r + 1) if bs.size(a) >= i)
                   for i in range(max(bs.sizes), 0, -1))
    return PfaffianSystem(bs, tuple(labels), rhs, df, layers, None, "conservation")


def solve_conservation(df: DefiningField, data: InitialData, target: Sequence[float],
                       step: float = 1e-2) -> tuple[np.ndarray, Solution]:
    sys = conservation_system(df)
    sol = integrate(sys, data, target, step)
    w = np.array([sol.values[omega_label(k.i, k.alpha)] for k in df.bs.indices()])
    return w, sol


# -- residuals --------------------------------------------------------------


def _grad_matrix(sol: Solution, labels) -> tuple[np.ndarray, np.ndarray]:
    w = np.array([sol.values[a] for a in labels])
    dw = np.array([sol.grad(a) for a in labels])
    return w, dw


def closedness_residual(domega: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Max ``|d_j omega_i - d_i omega_j|`` from ``domega[i, j] = d_j omega_i``."""
    D = np.asarray(domega, dtype=float)
    C = np.abs(D - D.T)
    i, j = np.unravel_index(int(np.argmax(C)), C.shape)
    return float(C[i, j]), (int(i) + 1, int(j) + 1)


def density_residual(bs: BlockStructure, gamma: np.ndarray, omega: Sequence[float],
                     domega: np.ndarray) -> float:
    """``c^s_{kj} nabla_s omega_i - c^s_{ij} nabla_s omega_k`` for ``omega = dh``."""
    c = bs.structure_constants
    g = np.asarray(gamma, dtype=float)
    # N[s, i] = nabla_s omega_i
    N = np.asarray(domega, dtype=float).T - np.einsum("tsi,t->si", g, np.asarray(omega, float))
    T = np.einsum("skj,si->kji", c, N)
    return float(np.max(np.abs(T - np.transpose(T, (2, 1, 0))))) if bs.n else 0.0


def hessian_density_residual(df: DefiningField, h: Expr, p: Sequence[float],
                             params: Mapping[str, float] | None = None) -> float:
    """The density condition for a closed-form ``h`` (gradient and Hessian exact)."""
    n = df.bs.n
    ev = FieldEvaluator([h], n, params)
    omega = ev.jacobian(p)[0]
    H = ev.hessians(p)[0]
    gamma = np.array(christoffel_at(df, list(p)), dtype=float)
    return density_residual(df.bs, gamma, omega, H)


def semisimple_conservation_rhs(gamma: np.ndarray, omega: Sequence[float], i: int, j: int):
    """``Gamma^i_{ji} omega_i + Gamma^j_{ji} omega_j`` (0-based ``i != j``)."""
    g = np.asarray(gamma, dtype=float)
    return g[i, j, i] * omega[i] + g[j, j, i] * omega[j]


class ClosednessError(ValueError):
    def __init__(self, residual: float, pair: tuple[int, int], where):
        super().__init__(
            f"covector is not closed: |d_{pair[1]} w_{pair[0]} - d_{pair[0]} w_{pair[1]}| "
            f"= {residual:.3e} at {list(where)}")
        self.residual = residual
        self.pair = pair
        self.where = tuple(where)


def potential_of(omega: Callable, base: Sequence[float], point: Sequence[float],
                 jacobian: Callable | None = None, tol: float = 1e-6,
                 nodes: int = 16) -> float:
    """``h(point)`` with ``dh = omega`` and ``h(base) = 0``.

    Integrates ``omega`` along the straight segment with Gauss-Legendre
    quadrature.  When ``jacobian`` is given, closedness is checked at every
    node first and a violation raises :class:`ClosednessError`.
    """
    a = np.asarray(base, dtype=float)
    b = np.asarray(point, dtype=float)
    x, wts = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for t, wt in zip(0.5 * (x + 1.0), 0.5 * wts):
        q = a + t * (b - a)
        if jacobian is not None:
            r, pair = closedness_residual(jacobian(q))
            if r > tol:
                raise ClosednessError(r, pair, q)
        total += wt * float(np.dot(omega(q), b - a))
    return total


# -- JB3 closed forms -------------------------------------------------------


def adaptive_simpson(f: Callable, a, b, tol: float = 1e-10, max_depth: int = 40):
    """Adaptive Simpson quadrature; the upper limit and values may be Taylor."""

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) * (1.0 / 6.0) * (fa + 4.0 * fm + fb)

    def rec(lo, hi, fa, fm, fb, whole, eps, depth):
        mid = (lo + hi) * 0.5
        lm, rm = (lo + mid) * 0.5, (mid + hi) * 0.5
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        delta = left + right - whole
        if depth >= max_depth or abs(value_of(delta)) <= 15.0 * eps:
            return left + right + delta * (1.0 / 15.0)
        return (rec(lo, mid, fa, flm, fm, left, eps * 0.5, depth + 1)
                + rec(mid, hi, fm, frm, fb, right, eps * 0.5, depth + 1))

    if value_of(b) == value_of(a):
        return (b - a) * f(a)
    fa, fb = f(a), f(b)
    m = (a + b) * 0.5
    fm = f(m)
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)


class _Cumulative:
    """``G(s) = int_base^s f``, reusing the nearest already computed point."""

    def __init__(self, f: Callable, base: float = 1.0, tol: float = 1e-10):
        self.f = f
        self.tol = tol
        self.known = {float(base): 0.0}

    def __call__(self, s):
        sv = value_of(s)
        if sv <= 0.0:
            raise ValueError("quadrature in u2 would cross the singular set u2 = 0")
        out = self.known.get(sv)
        if out is None:
            s0 = min(self.known, key=lambda x: abs(x - sv))
            out = self.known[sv] = self.known[s0] + adaptive_simpson(self.f, s0, sv, self.tol)
        if isinstance(s, Taylor) and s.K > 0:
            # the nilpotent tail: Gauss-Legendre is exact for the polynomial in t
            delta = s - sv
            x, w = np.polynomial.legendre.leggauss(s.K + 1)
            tail = 0.0
            for t, wt in zip(0.5 * (x + 1.0), 0.5 * w):
                tail = tail + wt * self.f(delta * t + sv)
            out = out + delta * tail
        return out


def _u1_function(e: Expr, df: DefiningField, name: str):
    bs = df.bs
    for v in free_variables(e, bs):
        if (v.i, v.alpha) != (1, 1):
            raise ValueError(f"{name} must depend on u1 only")
    ev = FieldEvaluator([e], bs.n, df.params)
    d1 = fold(differentiate(e, 1))
    ev1 = FieldEvaluator([d1], bs.n, df.params)

    def value(u):
        return ev._f[0](u)

    def prime(u):
        return ev1._f[0](u)

    def second(u):
        return ev1._df[0][0](u)

    return value, prime, second


def _jb3_parts(df: DefiningField):
    bs = df.bs
    if bs.sizes != (3,):
        raise ValueError("the closed forms need a single block of size 3")
    X3 = df.X[2]
    F1e = fold(differentiate(X3, 3))
    curv = fold(differentiate(F1e, 3))
    if not (isinstance(curv, Num) and curv.value == 0.0):
        raise ValueError("X^3 is not affine in u3")
    F2e = fold(substitute(X3, {3: 0.0}))
    return F1e, F2e


def jb3_symmetry_oracle(F3: Expr, F4: Expr, F5: Expr, df: DefiningField, p: Sequence,
                        Y1: Expr | None = None, k_reading: str = "grouped",
                        tol: float = 1e-10) -> list:
    """The closed-form JB3 symmetry at ``p`` (entries may be Taylor).

    Integrals in ``u2`` start at ``u2 = 1``.  ``Y1`` defaults to ``-F3``,
    the value compatible with the ``Y^2`` formula.  ``k_reading`` selects
    how the last integrand of ``k`` is grouped: ``"grouped"`` reads it as
    ``e^g (f F3' - F3'')``, ``"split"`` as ``e^g f F3' - F3''``.
    """
    F1e, F2e = _jb3_parts(df)
    n = 3
    P = df.params
    X = df.evaluator
    _, X1p, X1pp = _u1_function(df.X[0], df, "X^1")
    f3, f3p, f3pp = _u1_function(F3, df, "F3")
    f4, f4p, _ = _u1_function(F4, df, "F4")
    f5, _, _ = _u1_function(F5, df, "F5")
    evF1 = FieldEvaluator([F1e], n, P)
    evF2 = FieldEvaluator([F2e], n, P)
    u1, u2, u3 = p[0], p[1], p[2]

    def at(s):
        return [u1, s, 0.0]

    def X2(s):
        return X._f[1](at(s))

    def dX2(s, k):
        return X._df[1][k - 1](at(s))

    def d12X2(s):
        return X._second()[1][0][1](at(s))

    a1p, a1pp = X1p(at(1.0)), X1pp(at(1.0))
    g = _Cumulative(lambda s: (a1p - dX2(s, 2)) / X2(s), tol=tol)
    hh = _Cumulative(lambda s: (a1p - evF1._f[0](at(s))) / X2(s), tol=tol)
    f = _Cumulative(lambda s: (X2(s) * d12X2(s) - X2(s) * a1pp + dX2(s, 1) * a1p
                                - dX2(s, 1) * dX2(s, 2)) / (X2(s) * X2(s)), tol=tol)
    Ig = _Cumulative(lambda s: exp(g(s)), tol=tol)
    c3, c3p, c3pp = f3(at(1.0)), f3p(at(1.0)), f3pp(at(1.0))
    c4, c4p, c5 = f4(at(1.0)), f4p(at(1.0)), f5(at(1.0))
    if k_reading == "grouped":
        inner = _Cumulative(lambda s: exp(g(s)) * (f(s) * c3p - c3pp), tol=tol)
    elif k_reading == "split":
        inner = _Cumulative(lambda s: exp(g(s)) * f(s) * c3p - c3pp, tol=tol)
    else:
        raise ValueError("k_reading must be 'grouped' or 'split'")

    def k(s):
        x2 = X2(s)
        F1s, F2s = evF1._f[0](at(s)), evF2._f[0](at(s))
        dF2 = evF2._df[0][1](at(s))
        bracket = -x2 * x2 * f(s) + x2 * (dX2(s, 1) - dF2) + F2s * (F1s - a1p)
        return bracket * (c3p * Ig(s) - c4) + x2 * x2 * (c4p + inner(s))

    outer = _Cumulative(lambda s: k(s) * exp(hh(s) - g(s)) / (X2(s) * X2(s)), tol=tol)
    y1 = -c3 if Y1 is None else _u1_function(Y1, df, "Y1")[0](at(1.0))
    core = -c3p * Ig(u2) + c4
    eg = exp(-g(u2))
    y2 = core * eg
    F1p = evF1._f[0]([u1, u2, u3])
    y3 = (eg * u3 * (F1p - a1p) / X2(u2) * core
          + exp(-hh(u2)) * (c5 + outer(u2)) - c3p * u3)
    return [y1, y2, y3]


def jb3_symmetry_data(F3: Expr, F4: Expr, F5: Expr, df: DefiningField, u3_base: float,
                      Y1: Expr | None = None) -> dict:
    """Initial data at ``u2 = 1, u3 = u3_base`` matching :func:`jb3_symmetry_oracle`."""
    F1e, _ = _jb3_parts(df)
    X1p = fold(differentiate(df.X[0], 1))
    b3 = Num(float(u3_base))
    at = {2: 1.0, 3: float(u3_base)}
    y3 = add(sub(div(mul(mul(b3, sub(F1e, X1p)), F4), df.X[1]), mul(differentiate(F3, 1), b3)), F5)
    L = symmetry_label
    return {L(1, 1): fold(neg(F3)) if Y1 is None else Y1,
            L(2, 1): fold(substitute(F4, at)),
            L(3, 1): fold(substitute(y3, at))}


def jb3_omega_exprs(F1: Expr, F2: Expr, F3: Expr, eps: float) -> list[Expr]:
    """Closed-form conservation gradient ``(omega_1, omega_2, omega_3)`` for ``X = E - eps u1 e``."""
    if float(eps) in (1.0, 2.0):
        raise ValueError("the closed form divides by eps - 1 and eps - 2")
    bs = BlockStructure([3])
    d1 = fold(differentiate(F1, 1))
    names = {"F1": F1, "F2": F2, "F3": F3, "dF1": d1, "ddF1": fold(differentiate(d1, 1)),
             "dF2": fold(differentiate(F2, 1)), "eps": parse(repr(float(eps)))}
    src = ["dF1*u2^(-eps)*u3 - dF2*u2^(1-eps)/(eps-1) - ddF1*u2^(2-eps)/(eps-2) + F3",
           "-eps*F1*u2^(-(1+eps))*u3 + (dF1*u2 + F2)*u2^(-eps)",
           "F1*u2^(-eps)"]
    return [fold(substitute(parse(t, bs, list(names)), names)) for t in src]


def jb3_omega(F1: Expr, F2: Expr, F3: Expr, eps: float, p: Sequence[float],
              params: Mapping[str, float] | None = None) -> np.ndarray:
    """:func:`jb3_omega_exprs` evaluated at ``p``."""
    ev = FieldEvaluator(jb3_omega_exprs(F1, F2, F3, eps), 3, params)
    return ev.values([float(x) for x in p])


def jb3_omega_data(F1: Expr, F2: Expr, F3: Expr, eps: float, u3_base: float) -> dict:
    """Data at ``u2 = 1, u3 = u3_base`` reproducing :func:`jb3_omega`."""
    bs = BlockStructure([3])
    src = {
        3: "F1",
        2: "-eps*F1*b3 + dF1 + F2",
        1: "dF1*b3 - dF2/(eps-1) - ddF1/(eps-2) + F3",
    }
    vals = {"F1": F1, "F2": F2, "F3": F3, "dF1": fold(differentiate(F1, 1)),
            "dF2": fold(differentiate(F2, 1)), "ddF1": fold(differentiate(differentiate(F1, 1), 1)),
            "eps": parse(repr(float(eps))), "b3": parse(repr(float(u3_base)))}
    out = {}
    for i, s in src.items():
        tree = parse(s, bs, list(vals))
        out[omega_label(i, 1)] = fold(substitute(tree, vals))
    return out


def jb3_potential(F1: Expr, F2: Expr, eps: float) -> Expr:
    """``h = F1 u2^-eps u3 - F1' u2^(2-eps)/(eps-2) - F2 u2^(1-eps)/(eps-1)``."""
    bs = BlockStructure([3])
    names = {"F1": F1, "F2": F2, "dF1": fold(differentiate(F1, 1)),
             "eps": parse(repr(float(eps)))}
    tree = parse("F1*u2^(-eps)*u3 - dF1*u2^(2-eps)/(eps-2) - F2*u2^(1-eps)/(eps-1)",
                 bs, list(names))
    return fold(substitute(tree, names))
