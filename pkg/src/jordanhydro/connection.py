"""The canonical torsionless connection of a regular Jordan-block system.

Given the defining field ``X`` of ``u_t = (X o) u_x`` in canonical
coordinates, :func:`christoffel` builds the unique torsionless connection
with ``nabla e = 0`` and ``d_nabla(X o) = 0`` from explicit block formulas:
zero for three distinct blocks, a mixed-block recursion divided by the
eigenvalue gap, unit relations, and two same-block recursions divided by
``X^{2(alpha)}``.  The recursions are written over generic scalars, so
running them on order-1 jets yields exact first derivatives of Gamma, which
is how the Riemann tensor and the derivative lemmas are evaluated.

Array conventions (0-based): ``gamma[i, j, k] = Gamma^i_{jk}``,
``dgamma[i, j, k, l] = d_l Gamma^i_{jk}`` and
``R[i, j, k, l] = R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{ks} G^s_{lj} - G^i_{ls} G^s_{kj}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .blocks import BlockStructure, MultiIndex, unit_vector
from .expr import FieldEvaluator, free_variables, parse
from .jet import Jet, value_of, variables

__all__ = [
    "SingularConfigurationError",
    "NotDarbouxTsarevError",
    "DefiningField",
    "ChristoffelTensor",
    "RiemannTensor",
    "christoffel_generic",
    "christoffel_at",
    "christoffel",
    "christoffel_jet",
    "nabla_c",
    "skew_nabla_c",
    "dnabla_residual",
    "dnabla_V_residual",
    "nabla_e_residual",
    "riemann_from",
    "riemann",
    "check_3RC",
    "bianchi_residual",
    "LemmaResult",
    "LemmaReport",
    "lemma_suite",
    "check_structural_lemmas",
    "jb3_necessary_conditions",
    "tensor_json",
]

REGULARITY_TOL = 1e-8


class SingularConfigurationError(ArithmeticError):
    """The regularity assumptions fail at the evaluation point."""


class NotDarbouxTsarevError(ValueError):
    """A component X^{i(a)} depends on coordinates outside U^i."""


@dataclass
class DefiningField:
    """The vector field ``X`` with its block structure and parameter values."""

    bs: BlockStructure
    X: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.X) != self.bs.n:
            raise ValueError(f"X needs {self.bs.n} components, got {len(self.X)}")
        self.X = tuple(self.X)
        self.params = dict(self.params)
        self.evaluator = FieldEvaluator(self.X, self.bs.n, self.params)

    @classmethod
    def from_strings(cls, blocks: Sequence[int], components: Sequence[str],
                     params: Mapping[str, float] | None = None) -> "DefiningField":
        bs = blocks if isinstance(blocks, BlockStructure) else BlockStructure(blocks)
        params = dict(params or {})
        X = tuple(parse(s, bs, params.keys()) for s in components)
        return cls(bs, X, params)

    def dependence_violations(self) -> list[tuple[MultiIndex, MultiIndex]]:
        """Pairs (component, coordinate) with X^{i(a)} depending on u^{l(s)}, l > i."""
        bad = []
        for k, e in enumerate(self.X, start=1):
            mi = self.bs.multi_index(k)
            for v in sorted(free_variables(e, self.bs)):
                if v.i > mi.i:
                    bad.append((mi, v))
        return bad

    @property
    def darboux_tsarev(self) -> bool:
        return not self.dependence_violations()

    def require_darboux_tsarev(self):
        bad = self.dependence_violations()
        if bad:
            desc = ", ".join(f"X^{a} depends on u^{b}" for a, b in bad)
            raise NotDarbouxTsarevError(f"not of Darboux-Tsarev type: {desc}")

    def values(self, u) -> np.ndarray:
        return self.evaluator.values(u)

    def jacobian(self, u) -> np.ndarray:
        return self.evaluator.jacobian(u)

    def check_regular(self, u: Sequence[float]):
        """Raise :class:`SingularConfigurationError` if ``u`` is not a regular point."""
        _check_regular(self.bs, self.values(u))

    def christoffel(self, u: Sequence) -> list:
        """Nested-list Gamma[i][j][k] at ``u`` over any scalar type."""
        return christoffel_at(self, u)


@dataclass
class ChristoffelTensor:
    bs: BlockStructure
    point: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray | None = None


@dataclass
class RiemannTensor:
    bs: BlockStructure
    point: np.ndarray
    R: np.ndarray

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.R))) if self.R.size else 0.0

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.R + np.swapaxes(self.R, 2, 3))))


# -- the recursion ------------------------------------------------------------


def _check_regular(bs: BlockStructure, X: Sequence):
    x1 = [value_of(X[bs.pos(1, a)]) for a in range(1, bs.r + 1)]
    for a in range(1, bs.r + 1):
        for b in range(a + 1, bs.r + 1):
            if abs(x1[a - 1] - x1[b - 1]) < REGULARITY_TOL:
                raise SingularConfigurationError(
                    f"blocks {a} and {b} share the eigenvalue X^1 = {x1[a - 1]!r}")
        if bs.size(a) >= 2 and abs(value_of(X[bs.pos(2, a)])) < REGULARITY_TOL:
            raise SingularConfigurationError(f"X^2 of block {a} vanishes")


def _pairs_by_sum(m: int):
    """Index pairs 2 <= j <= k <= m in the order the same-block recursions need."""
    pairs = [(j, k) for j in range(2, m + 1) for k in range(j, m + 1)]
    return sorted(pairs, key=lambda jk: (-(jk[0] + jk[1]), jk[0]))


def christoffel_generic(bs: BlockStructure, X: Sequence, dX: Sequence[Sequence]) -> list:
    """Gamma as nested lists from values ``X[a]`` and partials ``dX[a][b] = d_b X^a``.

    Scalars may be floats or jets.  Raises :class:`SingularConfigurationError`
    when the eigenvalue gaps or some ``X^{2(alpha)}`` are below tolerance.
    """
    _check_regular(bs, X)
    n, r = bs.n, bs.r
    zero = 0.0
    gamma = [[[zero] * n for _ in range(n)] for _ in range(n)]

    def Xb(i, a):
        return X[bs.pos(i, a)] if 1 <= i <= bs.size(a) else zero

    def dXb(i, a, j, b):
        return dX[bs.pos(i, a)][bs.pos(j, b)] if 1 <= i <= bs.size(a) else zero

    for a in range(1, r + 1):
        ma = bs.size(a)
        for i in range(1, ma + 1):
            # G[b][j][k] = Gamma^{i(a)}_{j(b) k(a)}, mixed blocks
            G = {}
            for b in range(1, r + 1):
                if b == a:
                    continue
                mb = bs.size(b)
                gap = Xb(1, a) - Xb(1, b)
                g = [[zero] * (ma + 1) for _ in range(mb + 1)]
                for j in range(mb, 0, -1):
                    for k in range(ma, 0, -1):
                        acc = dXb(i - k + 1, a, j, b)
                        for s in range(k + 1, ma + 1):
                            acc = acc + g[j][s] * Xb(s - k + 1, a)
                        for s in range(j + 1, mb + 1):
                            acc = acc - g[s][k] * Xb(s - j + 1, b)
                        g[j][k] = -acc / gap
                G[b] = g
            # H[b][j][k] = Gamma^{i(a)}_{j(b) k(b)}, foreign same-block
            H = {}
            for b, g in G.items():
                mb = bs.size(b)
                h = [[zero] * (mb + 1) for _ in range(mb + 1)]
                for j in range(1, mb + 1):
                    h[j][1] = h[1][j] = -g[j][1]
                for j, k in _pairs_by_sum(mb):
                    acc = zero
                    for s in range(k + 1, mb + 1):
                        acc = acc + h[j - 1][s] * Xb(s - k + 1, b)
                    for s in range(j + 1, mb + 1):
                        acc = acc - h[k][s] * Xb(s - j + 2, b)
                    h[k][j] = h[j][k] = acc / Xb(2, b)
                H[b] = h
            # S[j][k] = Gamma^{i(a)}_{j(a) k(a)}
            S = [[zero] * (ma + 1) for _ in range(ma + 1)]
            for j in range(1, ma + 1):
                acc = zero
                for g in G.values():
                    acc = acc - g[1][j]
                S[j][1] = S[1][j] = acc
            for j, k in _pairs_by_sum(ma):
                acc = dXb(i - k + 1, a, j - 1, a) - dXb(i - j + 2, a, k, a)
                for s in range(k + 1, ma + 1):
                    acc = acc + S[j - 1][s] * Xb(s - k + 1, a)
                for s in range(j + 1, ma + 1):
                    acc = acc - S[k][s] * Xb(s - j + 2, a)
                S[k][j] = S[j][k] = acc / Xb(2, a)

            row = gamma[bs.pos(i, a)]
            for j in range(1, ma + 1):
                for k in range(1, ma + 1):
                    row[bs.pos(j, a)][bs.pos(k, a)] = S[j][k]
            for b, g in G.items():
                mb = bs.size(b)
                for j in range(1, mb + 1):
                    for k in range(1, ma + 1):
                        row[bs.pos(j, b)][bs.pos(k, a)] = g[j][k]
                        row[bs.pos(k, a)][bs.pos(j, b)] = g[j][k]
                    for k in range(1, mb + 1):
                        row[bs.pos(j, b)][bs.pos(k, b)] = H[b][j][k]
    return gamma


def christoffel_at(df: DefiningField, u: Sequence) -> list:
    """Gamma at ``u`` whose entries may be floats or order-1 jets."""
    X, dX = df.evaluator.at(u)
    return christoffel_generic(df.bs, X, dX)


def _as_arrays(gamma: list, n: int):
    """Split a jet-valued Gamma into value and gradient arrays."""
    m = next((x.n for row in gamma for col in row for x in col
              if isinstance(x, Jet) and x.order >= 1), n)
    vals = np.zeros((n, n, n))
    grads = np.zeros((n, n, n, m))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                x = gamma[i][j][k]
                vals[i, j, k] = value_of(x)
                if isinstance(x, Jet) and x.order >= 1:
                    grads[i, j, k] = x.grad
    return vals, grads


def christoffel(df: DefiningField, p: Sequence[float]) -> ChristoffelTensor:
    u = np.asarray(p, dtype=float)
    gamma = christoffel_at(df, list(u))
    return ChristoffelTensor(df.bs, u, np.array(gamma, dtype=float))


def christoffel_jet(df: DefiningField, p: Sequence[float]) -> ChristoffelTensor:
    """Gamma together with its first partials, by running the recursion on jets."""
    u = np.asarray(p, dtype=float)
    gamma = christoffel_at(df, variables(u, 1))
    vals, grads = _as_arrays(gamma, df.bs.n)
    return ChristoffelTensor(df.bs, u, vals, grads)


# -- derived tensors ----------------------------------------------------------


def nabla_c(bs: BlockStructure, gamma: np.ndarray) -> np.ndarray:
    """``N[l, k, i, j] = nabla_l c^k_{ij}`` (c is constant in canonical coordinates)."""
    c = bs.structure_constants
    return (np.einsum("klt,tij->lkij", gamma, c)
            - np.einsum("tli,ktj->lkij", gamma, c)
            - np.einsum("tlj,kit->lkij", gamma, c))


def skew_nabla_c(bs: BlockStructure, gamma: np.ndarray) -> np.ndarray:
    """``A[i, j, k, s] = nabla_j c^i_{ks} - nabla_k c^i_{js}``."""
    N = nabla_c(bs, gamma)  # N[l, i, k, s]
    A = np.einsum("jiks->ijks", N)
    return A - np.swapaxes(A, 1, 2)


def dnabla_residual(bs: BlockStructure, gamma: np.ndarray, Y: Sequence[float],
                    dY: np.ndarray) -> float:
    """Max of ``|nabla_k V^i_j - nabla_j V^i_k|`` for ``V = Y o``; ``dY[a, b] = d_b Y^a``."""
    c = bs.structure_constants
    Y = np.asarray(Y, dtype=float)
    dY = np.asarray(dY, dtype=float)
    V = np.einsum("ijs,s->ij", c, Y)
    dV = np.einsum("ijs,sk->ijk", c, dY)  # d_k V^i_j
    nV = dV + np.einsum("iks,sj->ijk", gamma, V) - np.einsum("skj,is->ijk", gamma, V)
    return float(np.max(np.abs(nV - np.swapaxes(nV, 1, 2))))


def dnabla_V_residual(df: DefiningField, p: Sequence[float],
                      tensor: ChristoffelTensor | None = None) -> float:
    tensor = tensor or christoffel(df, p)
    return dnabla_residual(df.bs, tensor.gamma, df.values(p), df.jacobian(p))


def nabla_e_residual(bs: BlockStructure, gamma: np.ndarray) -> float:
    """``max |Gamma^i_{jk} e^k|``; e is constant so this is ``nabla e``."""
    return float(np.max(np.abs(gamma @ unit_vector(bs))))


def riemann_from(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    d = np.einsum("iljk->ijkl", dgamma)  # d_k Gamma^i_{lj}
    R = d - np.swapaxes(d, 2, 3)
    quad = np.einsum("iks,slj->ijkl", gamma, gamma)
    return R + quad - np.swapaxes(quad, 2, 3)


def riemann(df: DefiningField, p: Sequence[float]) -> RiemannTensor:
    t = christoffel_jet(df, p)
    return RiemannTensor(df.bs, t.point, riemann_from(t.gamma, t.dgamma))


def bianchi_residual(R: np.ndarray) -> float:
    """First Bianchi identity ``R^i_{jkl} + R^i_{klj} + R^i_{ljk}``."""
    B = R + np.transpose(R, (0, 2, 3, 1)) + np.transpose(R, (0, 3, 1, 2))
    return float(np.max(np.abs(B)))


def check_3RC(df: DefiningField, p: Sequence[float], R: np.ndarray | None = None) -> float:
    """Max residual of both cyclic curvature-product identities."""
    if R is None:
        R = riemann(df, p).R
    c = df.bs.structure_constants
    # R^s_{lmi} c^j_{ks} cyclic in (m, i, k)
    T = np.einsum("slmi,jks->lmikj", R, c)
    form1 = T + np.transpose(T, (0, 2, 3, 1, 4)) + np.transpose(T, (0, 3, 1, 2, 4))
    # R^j_{skl} c^s_{mi} cyclic in (k, l, m)
    U = np.einsum("jskl,smi->jklmi", R, c)
    form2 = U + np.transpose(U, (0, 3, 1, 2, 4)) + np.transpose(U, (0, 2, 3, 1, 4))
    return float(max(np.max(np.abs(form1)), np.max(np.abs(form2))))


# -- structural lemmas --------------------------------------------------------


@dataclass
class LemmaResult:
    name: str
    passed: bool
    residual: float
    where: str = ""
    requires_dt: bool = False
    applicable: bool = True

    def as_dict(self) -> dict:
        return {"lemma": self.name, "passed": self.passed, "residual": self.residual,
                "where": self.where, "applicable": self.applicable}


@dataclass
class LemmaReport:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results if r.applicable)

    def failures(self) -> list:
        return [r for r in self.results if r.applicable and not r.passed]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "lemmas": [r.as_dict() for r in self.results]}


class _Worst:
    def __init__(self, name, tol, requires_dt=False):
        self.name, self.tol, self.requires_dt = name, tol, requires_dt
        self.value, self.where = 0.0, ""

    def see(self, residual, where):
        residual = abs(float(residual))
        if residual > self.value:
            self.value, self.where = residual, where

    def result(self) -> LemmaResult:
        return LemmaResult(self.name, self.value <= self.tol, self.value, self.where,
                           self.requires_dt)


def lemma_suite(bs: BlockStructure, tensor: ChristoffelTensor, tol: float = 1e-10,
                darboux_tsarev: bool = True, integrable: bool = True) -> LemmaReport:
    """Evaluate the structural identities of Gamma (and of its derivatives).

    Results are reported per lemma with the worst residual and where it
    occurs, written ``G^{i(a)}_{j(b)k(c)}``.  Identities that only hold for
    Darboux-Tsarev fields are skipped unless ``darboux_tsarev``; the
    derivative identities that follow from the curvature condition are
    marked not applicable when ``integrable`` is false.
    """
    g = tensor.gamma
    dg = tensor.dgamma
    r = bs.r
    P = bs.pos

    def G(i, a, j, b, k, c):
        return g[P(i, a), P(j, b), P(k, c)]

    def dG(i, a, j, b, k, c, l, d):
        return dg[P(i, a), P(j, b), P(k, c), P(l, d)]

    def lab(i, a, j, b, k, c, extra=""):
        return f"G^{i}({a})_{j}({b}){k}({c}){extra}"

    blocks = range(1, r + 1)
    m = bs.size
    out = []

    # symmetry and unit (hold for any output of the construction)
    w = _Worst("torsion-free", tol)
    idx = np.unravel_index(np.argmax(np.abs(g - np.swapaxes(g, 1, 2))), g.shape)
    w.see((g - np.swapaxes(g, 1, 2))[idx], "G^{}_{}{}".format(*(bs.label(x + 1) for x in idx)))
    out.append(w.result())

    w = _Worst("nabla-e", tol)
    ge = g @ unit_vector(bs)
    for i in range(bs.n):
        for j in range(bs.n):
            w.see(ge[i, j], f"G^{bs.label(i + 1)}_{bs.label(j + 1)}k e^k")
    out.append(w.result())

    w = _Worst("block translation", tol)
    for a in blocks:
        for b in blocks:
            if b == a:
                continue
            for i in range(1, m(a) + 1):
                for j in range(1, m(b) + 1):
                    for k in range(1, m(a) + 1):
                        ref = G(i - k + 1, a, j, b, 1, a) if i >= k else 0.0
                        w.see(G(i, a, j, b, k, a) - ref, lab(i, a, j, b, k, a))
                    for k in range(1, m(b) + 1):
                        ref = G(i, a, j + k - 1, b, 1, b) if j + k <= m(b) + 1 else 0.0
                        w.see(G(i, a, j, b, k, b) - ref, lab(i, a, j, b, k, b))
        for i in range(1, m(a) + 1):
            for j in range(1, m(a) + 1):
                ref = G(i - j + 1, a, 1, a, 1, a) if i >= j else 0.0
                w.see(G(i, a, 1, a, j, a) - ref, lab(i, a, 1, a, j, a))
    out.append(w.result())

    # equivalence of two zero patterns in each block
    w = _Worst("zero-pattern equivalence", 0.0)
    for a in blocks:
        first = max((abs(G(i, a, j, a, k, a)) for i in range(1, m(a) + 1)
                     for j in range(i + 1, m(a) + 1) for k in range(2, m(a) + 1)), default=0.0)
        second = max((abs(G(i, a, j, a, k, a)) for i in range(1, m(a) + 1)
                      for j in range(2, m(a) + 1) for k in range(2, m(a) + 1)
                      if i - j - k <= -3), default=0.0)
        if (first <= tol) != (second <= tol):
            w.see(max(first, second), f"block {a}: patterns disagree ({first:.3g} vs {second:.3g})")
    out.append(w.result())

    if not darboux_tsarev:
        return LemmaReport(out)

    w = _Worst("G^i_jk = 0 for i < max(j,k)", tol, True)
    w2 = _Worst("same-block zeros i-j-k <= -3", tol, True)
    w3 = _Worst("G^i(a)_j(p)k(b) = 0 for i-j-k < -1", tol, True)
    for a in blocks:
        for i in range(1, m(a) + 1):
            for b in blocks:
                for j in range(1, m(b) + 1):
                    for c in blocks:
                        for k in range(1, m(c) + 1):
                            v = G(i, a, j, b, k, c)
                            if i < max(j, k):
                                w.see(v, lab(i, a, j, b, k, c))
                            if a == b == c and i - j - k <= -3:
                                w2.see(v, lab(i, a, j, b, k, c))
                            if c != a and i - j - k < -1:
                                w3.see(v, lab(i, a, j, b, k, c))
    out += [w.result(), w2.result(), w3.result()]

    if dg is None:
        return LemmaReport(out)

    w = _Worst("G^i depends on U^i only", tol, True)
    for a in blocks:
        for i in range(1, m(a) + 1):
            for b in blocks:
                for j in range(1, m(b) + 1):
                    for c in blocks:
                        for k in range(1, m(c) + 1):
                            for d in blocks:
                                for l in range(i + 1, m(d) + 1):
                                    w.see(dG(i, a, j, b, k, c, l, d),
                                          lab(i, a, j, b, k, c, f" d/du^{l}({d})"))
    out.append(w.result())

    w = _Worst("dG^j(a)_2(a)j(a) across blocks", tol, True)
    w2 = _Worst("mixed-block derivative zeros", tol, True)
    w3 = _Worst("three-block derivative swap", tol, True)
    w4 = _Worst("dG^k(a)_k(b)1(a) upper derivatives", tol, True)
    for a in blocks:
        for b in blocks:
            if b == a:
                continue
            if m(a) >= 2:
                for j in range(1, m(a) + 1):
                    for k in range(1, m(b) + 1):
                        w.see(dG(j, a, 2, a, j, a, k, b), lab(j, a, 2, a, j, a, f" d/du^{k}({b})"))
            for i in range(1, m(a) + 1):
                for j in range(1, m(a) + 1):
                    for k in range(1, m(b) + 1):
                        for p in blocks:
                            for mm in range(i - j + 2, m(p) + 1):
                                if mm >= 1:
                                    w2.see(dG(i, a, j, a, k, b, mm, p),
                                           lab(i, a, j, a, k, b, f" d/du^{mm}({p})"))
            for c in blocks:
                if c in (a, b):
                    continue
                for j in range(1, min(m(a), m(b)) + 1):
                    for l in range(1, m(a) + 1):
                        for ii in range(1, m(c) + 1):
                            for mm in range(1, m(b) + 1):
                                lhs = dG(j, a, l, a, ii, c, mm, b)
                                rhs = dG(j, b, l, a, mm, b, ii, c)
                                w3.see(lhs - rhs, lab(j, a, l, a, ii, c, f" d/du^{mm}({b})"))
            for k in range(1, min(m(a), m(b)) + 1):
                for j in range(3, m(a) + 1):
                    w4.see(dG(k, a, k, b, 1, a, j, a), lab(k, a, k, b, 1, a, f" d/du^{j}({a})"))
    w5 = _Worst("same-block derivative zeros", tol, True)
    for a in blocks:
        for j in range(1, m(a) + 1):
            for l in range(1, m(a) + 1):
                for i in range(1, m(a) + 1):
                    for mm in range(max(1, j - l + 3), m(a) + 1):
                        w5.see(dG(j, a, l, a, i, a, mm, a), lab(j, a, l, a, i, a, f" d/du^{mm}({a})"))
    gated = [w.result(), w5.result(), w3.result(), w4.result()]
    for res in gated:
        res.applicable = integrable
    out += [gated[0], gated[1], w2.result(), gated[2], gated[3]]
    return LemmaReport(out)


def check_structural_lemmas(df: DefiningField, p: Sequence[float], tol: float = 1e-10,
                            tensor: ChristoffelTensor | None = None,
                            rc_tol: float = 1e-8) -> LemmaReport:
    """Lemma suite at ``p``; the curvature-derived identities need 3RC to hold."""
    if tensor is None:
        tensor = christoffel_jet(df, p)
    integrable = True
    if tensor.dgamma is not None:
        R = riemann_from(tensor.gamma, tensor.dgamma)
        integrable = check_3RC(df, p, R) <= rc_tol
    return lemma_suite(df.bs, tensor, tol, darboux_tsarev=df.darboux_tsarev,
                       integrable=integrable)


def jb3_necessary_conditions(df: DefiningField, p: Sequence[float]) -> dict:
    """Residuals of ``d_3 X^1 = 0`` and ``d_3 X^2 = -d_2 X^1`` for a single 3-block."""
    if df.bs.sizes != (3,):
        raise ValueError("these conditions are stated for a single block of size 3")
    J = df.jacobian(p)
    return {"dX1/du3": float(J[0, 2]), "dX2/du3 + dX1/du2": float(J[1, 2] + J[0, 1])}


def tensor_json(bs: BlockStructure, point: Sequence[float], gamma: np.ndarray,
                cutoff: float = 1e-14) -> str:
    entries = []
    n = bs.n
    for i in range(n):
        for j in range(n):
            for k in range(n):
                v = float(gamma[i, j, k])
                if abs(v) > cutoff:
                    entries.append([bs.label(i + 1), bs.label(j + 1), bs.label(k + 1), v])
    return json.dumps({"point": [float(x) for x in point], "gamma": entries})
