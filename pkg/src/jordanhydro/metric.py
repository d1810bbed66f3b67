"""Hankel-block metrics and the Dubrovin-Novikov conditions.

In canonical coordinates a metric compatible with ``V = X o`` through
``g V = (g V)^T`` has Hankel blocks ``g_{i(a)j(b)} = delta_ab theta_{(i+j-1)(a)}``.
Everything here is driven by the generators ``theta``: the inverse, the
Levi-Civita connection, its curvature, and the residuals of the equivalent
forms of the second Dubrovin-Novikov condition.

A theta field is any callable taking a coordinate list (floats or
:class:`~jordanhydro.taylor.Taylor`) to ``n`` generator values; derivatives
come from evaluating it on Taylor inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .blocks import BlockStructure, unit_vector
from .connection import DefiningField, RiemannTensor, christoffel_at, riemann_from
from .darboux import InitialData, PfaffianSystem, integrate, rhs_values
from .expr import Expr, FieldEvaluator, differentiate, fold, free_variables, parse, substitute
from .jet import value_of
from .taylor import Taylor

__all__ = [
    "SingularMetricError",
    "HankelMetric",
    "ThetaField",
    "CascadeThetaField",
    "theta_label",
    "hankel_metric",
    "levi_civita",
    "levi_civita_generic",
    "check_DN1",
    "check_DN2",
    "check_ch_sym",
    "check_eq_for_g",
    "check_reduced",
    "riemann_of_metric",
    "theta_system",
    "jb3_theta",
    "jb3_flat_family",
    "semisimple_metric_rhs",
    "check_semisimple_reduction",
]


class SingularMetricError(ArithmeticError):
    """Some ``theta_{m(a)}`` vanishes, so the Hankel metric is degenerate."""


def theta_label(i: int, alpha: int) -> str:
    return f"theta_{i}({alpha})"


@dataclass
class HankelMetric:
    bs: BlockStructure
    g: np.ndarray
    g_inv: np.ndarray
    gbar: list

    def values(self) -> tuple[np.ndarray, np.ndarray]:
        conv = np.vectorize(value_of, otypes=[float])
        return conv(self.g), conv(self.g_inv)


def hankel_metric(bs: BlockStructure, theta: Sequence) -> HankelMetric:
    """Assemble ``g`` and its inverse from the generators (any scalar type)."""
    if len(theta) != bs.n:
        raise ValueError(f"theta needs {bs.n} components, got {len(theta)}")
    generic = any(not isinstance(t, (int, float, np.floating)) for t in theta)
    dtype = object if generic else float
    n = bs.n
    g = np.zeros((n, n), dtype=dtype)
    gi = np.zeros((n, n), dtype=dtype)
    if generic:
        g[:] = 0.0
        gi[:] = 0.0
    gbar = []
    for a in range(1, bs.r + 1):
        m = bs.size(a)
        th = [theta[bs.pos(i, a)] for i in range(1, m + 1)]
        top = th[m - 1]
        if value_of(top) == 0.0:
            raise SingularMetricError(f"theta_{m}({a}) vanishes: the Hankel metric is singular")
        inv_top = 1.0 / top
        gb = [inv_top]
        for i in range(2, m + 1):
            acc = 0.0
            for j in range(1, i):
                acc = acc + th[m - i + j - 1] * gb[j - 1]
            gb.append(-acc * inv_top)
        gbar.append(gb)
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                if i + j - 1 <= m:
                    g[bs.pos(i, a), bs.pos(j, a)] = th[i + j - 2]
                if i + j - m >= 1:
                    gi[bs.pos(i, a), bs.pos(j, a)] = gb[i + j - m - 1]
    return HankelMetric(bs, g, gi, gbar)


class ThetaField:
    """Generators given as expressions in the canonical coordinates."""

    def __init__(self, bs: BlockStructure, exprs: Sequence[Expr],
                 params: Mapping[str, float] | None = None):
        if len(exprs) != bs.n:
            raise ValueError(f"theta needs {bs.n} components, got {len(exprs)}")
        self.bs = bs
        self.exprs = tuple(exprs)
        self._ev = FieldEvaluator(self.exprs, bs.n, params)

    @classmethod
    def from_strings(cls, bs: BlockStructure, sources: Sequence[str],
                     params: Mapping[str, float] | None = None) -> "ThetaField":
        params = dict(params or {})
        return cls(bs, [parse(s, bs, params) for s in sources], params)

    def __call__(self, u: Sequence):
        return [f(u) for f in self._ev._f]


class CascadeThetaField:
    """Generators obtained by integrating :func:`theta_system` from initial data.

    Called on floats it returns the integrated values; called on the
    coordinate Taylor variables it returns Taylor polynomials of the
    discrete solution, so curvature and the first-order checks apply.
    """

    def __init__(self, df: DefiningField, data: InitialData, step: float = 1e-2):
        self.df = df
        self.system = theta_system(df)
        self.data = data
        self.step = step
        self.labels = [theta_label(k.i, k.alpha) for k in df.bs.indices()]
        self._jets: dict = {}  # point -> jets of the highest order computed there

    def __call__(self, u: Sequence):
        if not any(isinstance(x, Taylor) for x in u):
            sol = integrate(self.system, self.data, [float(x) for x in u], self.step)
            return [sol.values[a] for a in self.labels]
        K = u[0].K
        n = len(u)
        for k, x in enumerate(u):
            if not (isinstance(x, Taylor) and x.K == K and x.d == n
                    and np.array_equal(x.gradient(), np.eye(n)[k])):
                raise TypeError("expected the coordinate Taylor variables in order")
        key = tuple(x.value for x in u)
        have = self._jets.get(key)
        if have is None or have[0] < K:
            sol = integrate(self.system, self.data, list(key), self.step, jet_order=K)
            have = self._jets[key] = (K, [sol.jets[a] for a in self.labels])
        return [t.truncate(K) for t in have[1]]


def _theta_taylor(theta: Callable, p: Sequence[float], order: int) -> list:
    n = len(p)
    u = [Taylor.variable(float(x), k, n, order) for k, x in enumerate(p)]
    out = []
    for t in theta(u):
        out.append(t if isinstance(t, Taylor) else Taylor.constant(float(t), n, order))
    return out


def _first_order(theta: Callable, p: Sequence[float]):
    th = _theta_taylor(theta, p, 1)
    vals = np.array([t.value for t in th])
    d = np.array([t.gradient() for t in th])  # d[a, k] = d_k theta_a
    return vals, d


def levi_civita(bs: BlockStructure, theta: Sequence, dtheta: Sequence[Sequence]) -> list:
    """Levi-Civita symbols from the block formula (nested lists, any scalar type).

    ``dtheta[a][k]`` is ``d_k theta_a`` (0-based flat indices).
    """
    n = bs.n
    gbar = hankel_metric(bs, theta).gbar
    out = [[[0.0] * n for _ in range(n)] for _ in range(n)]

    def th_d(i, a, k):
        # d_k theta_{i(a)}, zero beyond the block
        return dtheta[bs.pos(i, a)][k] if 1 <= i <= bs.size(a) else 0.0

    for a in range(1, bs.r + 1):
        m = bs.size(a)
        gb = gbar[a - 1]
        for i in range(1, m + 1):
            for jf in range(n):
                j, b = bs.multi_index(jf + 1)
                for kf in range(jf, n):
                    k, c = bs.multi_index(kf + 1)
                    acc = 0.0
                    for s in range(1, m + 1):
                        q = i + s - m
                        if q < 1:
                            continue
                        term = 0.0
                        if a == c:
                            term = term + th_d(s + k - 1, a, jf)
                        if a == b:
                            term = term + th_d(j + s - 1, a, kf)
                        if b == c:
                            term = term - th_d(j + k - 1, b, bs.pos(s, a))
                        acc = acc + gb[q - 1] * term
                    out[bs.pos(i, a)][jf][kf] = out[bs.pos(i, a)][kf][jf] = 0.5 * acc
    return out


def levi_civita_generic(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """``(1/2) g^{il}(d_j g_lk + d_k g_lj - d_l g_jk)`` with ``dg[l, k, j] = d_j g_lk``."""
    t = np.einsum("lkj->ljk", dg) + np.einsum("ljk->ljk", dg) - np.einsum("jkl->ljk", dg)
    return 0.5 * np.einsum("il,ljk->ijk", g_inv, t)


def _metric_data(bs: BlockStructure, theta: Callable, p: Sequence[float]):
    vals, d = _first_order(theta, p)
    hm = hankel_metric(bs, list(vals))
    G = np.array(levi_civita(bs, list(vals), d), dtype=float)
    return vals, d, hm, G


def check_DN1(g: np.ndarray, V: np.ndarray) -> float:
    gv = np.asarray(g, dtype=float) @ np.asarray(V, dtype=float)
    return float(np.max(np.abs(gv - gv.T)))


def check_DN2(theta: Callable, df: DefiningField, p: Sequence[float]) -> float:
    """``max |nabla~_i V^k_j - nabla~_j V^k_i|`` for ``V = X o``."""
    bs = df.bs
    _, _, _, Gt = _metric_data(bs, theta, p)
    c = bs.structure_constants
    X = df.values(p)
    dX = df.jacobian(p)  # dX[s, i] = d_i X^s
    V = np.einsum("kjs,s->kj", c, X)
    dV = np.einsum("kjs,si->ikj", c, dX)  # dV[i, k, j] = d_i V^k_j
    nab = dV + np.einsum("kis,sj->ikj", Gt, V) - np.einsum("sij,ks->ikj", Gt, V)
    return float(np.max(np.abs(nab - np.transpose(nab, (2, 1, 0)))))


def _lie_e_g(bs: BlockStructure, d: np.ndarray) -> np.ndarray:
    """``(L_e g)_{km} = c^s_{km} e^t d_t theta_s`` in canonical coordinates."""
    e = unit_vector(bs)
    return np.einsum("skm,s->km", bs.structure_constants, d @ e)


def check_ch_sym(theta: Callable, df: DefiningField, p: Sequence[float]) -> dict:
    """Residuals of both printed right-hand sides of the Christoffel-difference identity."""
    bs = df.bs
    vals, d, hm, Gt = _metric_data(bs, theta, p)
    G = np.array(christoffel_at(df, list(p)), dtype=float)
    _, gi = hm.values()
    c = bs.structure_constants
    Le = _lie_e_g(bs, d)
    nab_theta = d.T - np.einsum("skm,s->km", Gt, vals)  # [k, m] = nabla~_k theta_m
    form1 = -np.einsum("lk,mij,km->lij", gi, c, nab_theta - Le)
    dtheta = d.T - d  # [m, k] = d_m theta_k - d_k theta_m
    form2 = 0.5 * np.einsum("lk,mij,mk->lij", gi, c, dtheta + Le)
    diff = Gt - G
    return {"form1": float(np.max(np.abs(diff - form1))),
            "form2": float(np.max(np.abs(diff - form2)))}


def check_eq_for_g(theta: Callable, df: DefiningField, p: Sequence[float]) -> float:
    bs = df.bs
    vals, d = _first_order(theta, p)
    G = np.array(christoffel_at(df, list(p)), dtype=float)
    c = bs.structure_constants
    e = unit_vector(bs)
    # d[r, i] = d_i theta_r
    lhs = (np.einsum("rhj,ri->hij", c, d) + np.einsum("rih,rj->hij", c, d)
           - np.einsum("sij,hs->hij", c, d))
    rhs = (2.0 * np.einsum("rhs,sij,r->hij", c, G, vals)
           + np.einsum("sij,rhs,r->hij", c, c, d @ e))
    return float(np.max(np.abs(lhs - rhs)))


def check_reduced(theta: Callable, df: DefiningField, p: Sequence[float]) -> float:
    """The contracted (necessary-only) form; a pass does not certify DN2."""
    bs = df.bs
    vals, d = _first_order(theta, p)
    G = np.array(christoffel_at(df, list(p)), dtype=float)
    c = bs.structure_constants
    e = unit_vector(bs)
    sym = d.T + d  # [i, j] = d_i theta_j + d_j theta_i
    lhs = sym - np.einsum("sij,s->ij", c, e @ sym)
    rhs = 2.0 * np.einsum("kij,k->ij", G, vals)
    return float(np.max(np.abs(lhs - rhs)))


def riemann_of_metric(bs: BlockStructure, theta: Callable, p: Sequence[float]) -> RiemannTensor:
    th = _theta_taylor(theta, p, 2)
    d1 = [[t.partial(k) for k in range(bs.n)] for t in th]
    G = levi_civita(bs, th, d1)
    n = bs.n
    vals = np.zeros((n, n, n))
    grads = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                x = G[i][j][k]
                if isinstance(x, Taylor):
                    vals[i, j, k] = x.value
                    grads[i, j, k] = x.gradient()
                else:
                    vals[i, j, k] = float(x)
    return RiemannTensor(bs, np.asarray(p, dtype=float), riemann_from(vals, grads))


# -- the theta cascade ------------------------------------------------------


def theta_system(df: DefiningField) -> PfaffianSystem:
    """Generators of DN metrics as a Darboux cascade, one independent group per block."""
    df.require_darboux_tsarev()
    bs = df.bs
    L = theta_label
    rhs: dict = {}

    def th(fr, i, a):
        return fr.w[L(i, a)] if 1 <= i <= bs.size(a) else 0.0

    def dth(fr, i, a, j):
        return fr.d(L(i, a), bs.flat_index(j, a)) if 1 <= i <= bs.size(a) else 0.0

    def zero(fr):
        return 0.0

    def top2(a):
        m = bs.size(a)

        def f(fr):
            G = fr.gamma()
            acc = 0.0
            for k in range(2, m + 1):
                acc = acc + G[bs.pos(k, a)][bs.pos(2, a)][bs.pos(k, a)]
            return acc * (2.0 / m) * fr.w[L(m, a)]

        return f

    def same(i, a, j):
        m = bs.size(a)

        def f(fr):
            G = fr.gamma()
            acc = dth(fr, i + 1, a, j - 1) + dth(fr, i + j - 2, a, 2) - dth(fr, i + j - 1, a, 1)
            for s in range(j - 1, m - i + 2):
                coef = -G[bs.pos(s, a)][bs.pos(2, a)][bs.pos(j - 1, a)]
                if s - j + 1 >= 1:
                    coef = coef + G[bs.pos(s - j + 1, a)][bs.pos(1, a)][bs.pos(1, a)]
                acc = acc + 2.0 * coef * th(fr, i + s - 1, a)
            return acc

        return f

    def cross(i, a, j, b):
        m = bs.size(a)

        def f(fr):
            G = fr.gamma()
            acc = 0.0
            for s in range(j, m - i + 2):
                acc = acc + G[bs.pos(s, a)][bs.pos(j, b)][bs.pos(1, a)] * th(fr, s + i - 1, a)
            return 2.0 * acc

        return f

    for a in range(1, bs.r + 1):
        m = bs.size(a)
        for i in range(1, m + 1):
            lab = L(i, a)
            for j in range(2, m + 1):
                if i == m:
                    rhs[(lab, bs.flat_index(j, a))] = top2(a) if j == 2 else zero
                elif j >= 3:
                    rhs[(lab, bs.flat_index(j, a))] = same(i, a, j) if j <= m - i + 2 else zero
            for b in range(1, bs.r + 1):
                if b == a:
                    continue
                for j in range(1, bs.size(b) + 1):
                    rhs[(lab, bs.flat_index(j, b))] = cross(i, a, j, b) if j <= m - i + 1 else zero
    top = max(bs.sizes)
    layers = tuple(
        tuple(L(bs.size(a) - q, a) for a in range(1, bs.r + 1) if bs.size(a) > q)
        for q in range(top))
    groups = tuple(tuple(L(i, a) for i in range(1, bs.size(a) + 1)) for a in range(1, bs.r + 1))
    unknowns = tuple(L(k.i, k.alpha) for k in bs.indices())
    return PfaffianSystem(bs, unknowns, rhs, df, layers, groups, "metric")


# -- JB3 closed forms -------------------------------------------------------

_JB3 = BlockStructure([3])


def _assemble(template: str, names: Mapping[str, Expr]) -> Expr:
    tree = parse(template, _JB3, list(names))
    return fold(substitute(tree, dict(names)))


def _u1(e: Expr) -> Expr:
    return fold(differentiate(e, 1))


def jb3_theta(F1: Expr, F2: Expr, F3: Expr, eps: float, printed: bool = False) -> list[Expr]:
    """Generators ``(theta_1, theta_2, theta_3)`` for ``X = E - eps u1 e``.

    ``F1`` depends on ``u1``; ``F2`` and ``F3`` on ``u1, u2``.  The linear
    coefficient of ``u3`` in ``theta_1`` is ``-F1' u2^(-4eps/3) + 2 d_2 F2 +
    2 eps F2/u2``, which the cascade forces; ``printed=True`` uses
    ``2 (eps + 1) d_2 F2`` in its place instead (kept as a negative control).
    """
    for name, f, allowed in (("F1", F1, {1}), ("F2", F2, {1, 2}), ("F3", F3, {1, 2})):
        bad = {_JB3.flat_index(v.i, v.alpha) for v in free_variables(f, _JB3)} - allowed
        if bad:
            raise ValueError(f"{name} depends on a coordinate it may not depend on")
    names = {"F1": F1, "F2": F2, "F3": F3, "dF1": _u1(F1),
             "d2F2": fold(differentiate(F2, 2)), "eps": parse(repr(float(eps)))}
    lin = ("2*(eps+1)*d2F2" if printed else "2*d2F2 + 2*eps*F2/u2")
    t1 = _assemble(f"eps/9*(2*eps-3)*F1*u2^(-2-4*eps/3)*u3^2"
                   f" + (-dF1*u2^(-4*eps/3) + {lin})*u3 + F3", names)
    t2 = _assemble("-2/3*eps*F1*u2^(-1-4*eps/3)*u3 + F2", names)
    t3 = _assemble("F1*u2^(-4*eps/3)", names)
    return [t1, t2, t3]


def jb3_flat_family(F1: Expr, F4: Expr, F5: Expr, F6: Expr, F7: Expr,
                    eps: float = 3.0) -> list[Expr]:
    """Flat generators: ``eps = 3`` with the curvature-free ``F2``, ``F3``."""
    if float(eps) != 3.0:
        raise ValueError(
            f"eps = {eps}: R^1_212 = eps(eps-3)/(9 u2^2) vanishes only for eps in {{0, 3}}; "
            "the flat family is built for eps = 3")
    names = {"F1": F1, "F4": F4, "F5": F5, "F6": F6, "F7": F7,
             "dF1": _u1(F1), "dF5": _u1(F5)}
    F2 = _assemble("F4/u2^2 + F5/u2^4 - 1/2*dF1/u2^3", names)
    F3 = _assemble("F7/u2^2 + F6/u2 + F4^2/F1 - 2*dF5/u2^3 + 3*F5*dF1/(F1*u2^3)"
                   " + F5^2/(F1*u2^4)", names)
    return jb3_theta(F1, F2, F3, 3.0)


def semisimple_metric_rhs(df: DefiningField, p: Sequence[float], g_diag: Sequence[float]):
    """``2 d_j v^i / (v^j - v^i) g_ii`` as a matrix ``[i, j]`` (zero diagonal)."""
    if any(m != 1 for m in df.bs.sizes):
        raise ValueError("the diagonal form needs blocks of size 1")
    v = df.values(p)
    dv = df.jacobian(p)
    n = df.bs.n
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i, j] = 2.0 * dv[i, j] / (v[j] - v[i]) * g_diag[i]
    return out


def check_semisimple_reduction(df: DefiningField, p: Sequence[float],
                               g_diag: Sequence[float]) -> float:
    """Max difference between the theta-system right-hand sides and the diagonal form."""
    bs = df.bs
    direct = semisimple_metric_rhs(df, p, g_diag)
    got = rhs_values(theta_system(df), p,
                     {theta_label(1, a): float(g_diag[a - 1]) for a in range(1, bs.r + 1)})
    worst = 0.0
    for a in range(1, bs.r + 1):
        for j in range(1, bs.n + 1):
            if j != a:
                worst = max(worst, abs(got[(theta_label(1, a), j)] - direct[a - 1, j - 1]))
    return worst
