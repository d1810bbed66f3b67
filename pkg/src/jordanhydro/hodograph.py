"""Generalized hodograph solutions of ``u_t = (X o) u_x``.

Given symmetries ``X_(k)`` of the flow, the algebraic system

    x e + sum_k t_k X_(k)(u) = 0

defines ``u(x, t_1, ..., t_K)`` implicitly, and ``u`` evolves along ``t_k``
by ``u_{t_k} = X_(k) o u_x``.  Points are found by Newton's method and
grids by raster continuation; the PDE is checked with central differences.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .blocks import BlockStructure, mult_operator, unit_vector
from .connection import DefiningField, SingularConfigurationError, christoffel, dnabla_residual
from .expr import Expr, FieldEvaluator, parse
from .jet import DomainError

__all__ = [
    "HodographError",
    "DegeneratePointError",
    "NoConvergenceError",
    "NotASymmetryError",
    "SymmetryField",
    "HodographProblem",
    "PointSolution",
    "SpaceTimeSample",
    "solve_point",
    "check_M_structure",
    "sample_grid",
    "verify_pde",
    "pde_convergence",
    "velocity_form",
]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
DET_TOL = 1e-12


class HodographError(ArithmeticError):
    pass


class DegeneratePointError(HodographError):
    """``M = sum_k t_k dX_(k)`` is singular at the iterate."""


class NoConvergenceError(HodographError):
    def __init__(self, message: str, last: np.ndarray):
        super().__init__(message)
        self.last = last


class NotASymmetryError(ValueError):
    pass


@dataclass
class SymmetryField:
    label: str
    bs: BlockStructure
    exprs: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.exprs = tuple(self.exprs)
        if len(self.exprs) != self.bs.n:
            raise ValueError(f"symmetry {self.label!r} needs {self.bs.n} components")
        self.evaluator = FieldEvaluator(self.exprs, self.bs.n, self.params)

    @classmethod
    def from_strings(cls, label: str, bs: BlockStructure, sources: Sequence[str],
                     params: Mapping[str, float] | None = None) -> "SymmetryField":
        params = dict(params or {})
        return cls(label, bs, tuple(parse(s, bs, params) for s in sources), params)

    @classmethod
    def from_field(cls, df: DefiningField, label: str = "t") -> "SymmetryField":
        return cls(label, df.bs, tuple(df.X), dict(df.params))

    def residual(self, df: DefiningField, u: Sequence[float]) -> float:
        """``d_nabla(Y o)`` at ``u`` for the connection of ``df``."""
        G = christoffel(df, u).gamma
        ev = self.evaluator
        return dnabla_residual(df.bs, G, ev.values(u), ev.jacobian(u))


class HodographProblem:
    """The flow ``df`` with symmetries ``X_(k)``; ``region`` bounds Newton iterates."""

    def __init__(self, df: DefiningField, symmetries: Sequence[SymmetryField],
                 region: Sequence[tuple[float, float]] | None = None,
                 check_points: Sequence[Sequence[float]] = (), tol: float = 1e-8):
        if not symmetries:
            raise ValueError("at least one symmetry is needed")
        labels = [s.label for s in symmetries]
        if len(set(labels)) != len(labels):
            raise ValueError("symmetry labels must be distinct")
        self.df = df
        self.bs = df.bs
        self.symmetries = tuple(symmetries)
        self.labels = tuple(labels)
        self.region = None if region is None else np.asarray(region, dtype=float)
        exprs = [e for s in self.symmetries for e in s.exprs]
        params = {}
        for s in self.symmetries:
            params.update(s.params)
        self._ev = FieldEvaluator(exprs, self.bs.n, params)
        self._e = unit_vector(self.bs)
        self.symmetry_residuals = {}
        for p in check_points:
            for s in self.symmetries:
                r = s.residual(df, p)
                self.symmetry_residuals[s.label] = max(self.symmetry_residuals.get(s.label, 0.0), r)
                if r > tol:
                    raise NotASymmetryError(
                        f"{s.label!r} is not a symmetry: d_nabla residual {r:.3e} at {list(p)}")

    @property
    def K(self) -> int:
        return len(self.symmetries)

    def _split(self, flat: np.ndarray) -> np.ndarray:
        return flat.reshape((self.K, self.bs.n) + flat.shape[1:])

    def fields(self, u: Sequence[float]) -> np.ndarray:
        """``X_(k)(u)`` as a ``K x n`` array."""
        return self._split(self._ev.values(u))

    def residual(self, u: Sequence[float], x: float, t: Sequence[float]) -> np.ndarray:
        return x * self._e + np.asarray(t, dtype=float) @ self.fields(u)

    def M(self, u: Sequence[float], t: Sequence[float]) -> np.ndarray:
        J = self._split(self._ev.jacobian(u))
        return np.einsum("k,kij->ij", np.asarray(t, dtype=float), J)

    def _times(self, t) -> np.ndarray:
        if isinstance(t, Mapping):
            t = [t[label] for label in self.labels]
        t = np.asarray(t, dtype=float).reshape(-1)
        if t.size != self.K:
            raise ValueError(f"need {self.K} times, got {t.size}")
        return t


@dataclass
class PointSolution:
    u: np.ndarray
    iterations: int
    residual: float
    history: list


def solve_point(prob: HodographProblem, x: float, t, u_guess: Sequence[float],
                tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> PointSolution:
    """Newton's method on ``x e + sum t_k X_(k)(u) = 0``.

    Raises :class:`DegeneratePointError` for ``|det M| < 1e-12``,
    :class:`NoConvergenceError` when the iteration fails, and
    :class:`SingularConfigurationError` if it converges to a non-regular point.
    """
    t = prob._times(t)
    u = np.array(u_guess, dtype=float)
    history = []
    for it in range(max_iter + 1):
        try:
            F = prob.residual(u, x, t)
        except (DomainError, ArithmeticError) as exc:
            raise NoConvergenceError(f"evaluation failed at iterate {it}: {exc}", u) from exc
        r = float(np.max(np.abs(F)))
        history.append(r)
        if not np.isfinite(r):
            raise NoConvergenceError(f"iterate {it} is not finite", u)
        if r <= tol:
            prob.df.check_regular(u)
            return PointSolution(u, it, r, history)
        if it == max_iter:
            break
        M = prob.M(u, t)
        det = np.linalg.det(M)
        if abs(det) < DET_TOL:
            raise DegeneratePointError(f"singular M (det = {det:.3e}) at u = {u.tolist()}")
        u = u - np.linalg.solve(M, F)
        if prob.region is not None:
            lo, hi = prob.region[:, 0], prob.region[:, 1]
            if np.any(u < lo) or np.any(u > hi):
                raise NoConvergenceError(f"iterate {it + 1} left the region: {u.tolist()}", u)
    raise NoConvergenceError(f"no convergence in {max_iter} iterations (residual {r:.3e})", u)


def check_M_structure(prob: HodographProblem, u: Sequence[float], t) -> dict:
    """c-symmetry of ``M`` and its Toeplitz reconstruction from ``Z = M e``."""
    t = prob._times(t)
    M = prob.M(u, t)
    c = prob.bs.structure_constants
    A = np.einsum("ijs,sk->ijk", c, M)
    sym = float(np.max(np.abs(A - np.swapaxes(A, 1, 2))))
    Z = M @ prob._e
    toeplitz = float(np.max(np.abs(M - mult_operator(prob.bs, Z))))
    return {"c_symmetry": sym, "toeplitz": toeplitz, "Z": Z.tolist()}


@dataclass
class SpaceTimeSample:
    """Solutions on the grid ``xs x ts``; ``ts`` is the varied time ``vary``."""

    xs: np.ndarray
    ts: np.ndarray
    vary: int
    times: np.ndarray
    U: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    holes: list

    def point_times(self, j: int) -> np.ndarray:
        t = self.times.copy()
        t[self.vary] = self.ts[j]
        return t

    @property
    def ok(self) -> np.ndarray:
        return np.isfinite(self.U).all(axis=-1)

    def to_csv(self, fh=None) -> str:
        """Columns x, t_1..t_K, u_1..u_n, newton_iters, residual; holes omitted."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        K, n = self.times.size, self.U.shape[-1]
        w.writerow(["x"] + [f"t_{k + 1}" for k in range(K)] + [f"u_{i + 1}" for i in range(n)]
                   + ["newton_iters", "residual"])
        for j in range(len(self.ts)):
            t = self.point_times(j)
            for i in range(len(self.xs)):
                if not self.ok[j, i]:
                    continue
                w.writerow([repr(float(self.xs[i]))] + [repr(float(v)) for v in t]
                           + [repr(float(v)) for v in self.U[j, i]]
                           + [int(self.iterations[j, i]), repr(float(self.residual[j, i]))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def sample_grid(prob: HodographProblem, xs: Sequence[float], ts: Sequence[float],
                u_guess: Sequence[float], times, vary: int = 0) -> SpaceTimeSample:
    """Raster continuation: rows of constant ``t``, each point seeded by its neighbour.

    The first point of a row is seeded from the first solved point of the
    previous row.  Points where Newton fails are recorded as holes.
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    base = prob._times(times)
    n = prob.bs.n
    U = np.full((len(ts), len(xs), n), np.nan)
    iters = np.zeros((len(ts), len(xs)), dtype=int)
    res = np.full((len(ts), len(xs)), np.nan)
    holes = []
    row_seed = np.asarray(u_guess, dtype=float)
    for j, tv in enumerate(ts):
        t = base.copy()
        t[vary] = tv
        seed = row_seed
        first = None
        for i, x in enumerate(xs):
            try:
                sol = solve_point(prob, float(x), t, seed)
            except (HodographError, SingularConfigurationError) as exc:
                holes.append({"i": i, "j": j, "x": float(x), "t": float(tv),
                              "reason": type(exc).__name__, "message": str(exc)})
                continue
            U[j, i] = sol.u
            iters[j, i] = sol.iterations
            res[j, i] = sol.residual
            seed = sol.u
            if first is None:
                first = sol.u
        if first is not None:
            row_seed = first
    return SpaceTimeSample(xs, ts, vary, base, U, iters, res, holes)


def _pde_residuals(prob: HodographProblem, s: SpaceTimeSample, dx: float, dt: float):
    nt, nx = len(s.ts), len(s.xs)
    if nt < 3 or nx < 3:
        raise ValueError("verify_pde needs at least 3 points per axis")
    ok = s.ok
    out = np.full((nt, nx), np.nan)
    for j in range(1, nt - 1):
        for i in range(1, nx - 1):
            if not (ok[j, i] and ok[j, i - 1] and ok[j, i + 1] and ok[j - 1, i] and ok[j + 1, i]):
                continue
            u = s.U[j, i]
            ux = (s.U[j, i + 1] - s.U[j, i - 1]) / (2 * dx)
            ut = (s.U[j + 1, i] - s.U[j - 1, i]) / (2 * dt)
            V = mult_operator(prob.bs, prob.fields(u)[s.vary])
            out[j, i] = float(np.max(np.abs(ut - V @ ux)))
    return out


def verify_pde(prob: HodographProblem, sample: SpaceTimeSample,
               dx: float | None = None, dt: float | None = None) -> dict:
    """Central-difference residual ``max |u_t - (X_(k) o) u_x|`` over interior points."""
    dx = float(sample.xs[1] - sample.xs[0]) if dx is None else dx
    dt = float(sample.ts[1] - sample.ts[0]) if dt is None else dt
    r = _pde_residuals(prob, sample, dx, dt)
    if not np.isfinite(r).any():
        return {"residual": float("nan"), "where": None, "points": 0}
    j, i = np.unravel_index(np.nanargmax(r), r.shape)
    return {"residual": float(r[j, i]), "where": [float(sample.xs[i]), float(sample.ts[j])],
            "points": int(np.isfinite(r).sum())}


def pde_convergence(prob: HodographProblem, x0: float, t0: float, h: float, size: int,
                    u_guess: Sequence[float], times, vary: int = 0) -> dict:
    """PDE residual at spacing ``h`` and ``h/2`` on the same patch and the same points."""
    coarse = sample_grid(prob, x0 + h * np.arange(size), t0 + h * np.arange(size),
                         u_guess, times, vary)
    fine_n = 2 * size - 1
    fine = sample_grid(prob, x0 + 0.5 * h * np.arange(fine_n), t0 + 0.5 * h * np.arange(fine_n),
                       u_guess, times, vary)
    rc = _pde_residuals(prob, coarse, h, h)
    rf = _pde_residuals(prob, fine, 0.5 * h, 0.5 * h)[::2, ::2]
    both = np.isfinite(rc) & np.isfinite(rf)
    if not both.any():
        raise ValueError("no interior points shared by both grids")
    a, b = float(np.max(rc[both])), float(np.max(rf[both]))
    return {"coarse": a, "fine": b, "ratio": a / b if b > 0 else float("inf"),
            "points": int(both.sum()), "coarse_sample": coarse, "fine_sample": fine}


def velocity_form(df: DefiningField, w: Sequence[str | Expr],
                  params: Mapping[str, float] | None = None) -> HodographProblem:
    """``x e + t v = w`` with ``v = X``: symmetries ``("t", X)`` and ``("w", W)``.

    Solve with times ``{"t": t, "w": -1}``.
    """
    params = dict(params or {})
    exprs = tuple(e if isinstance(e, Expr) else parse(e, df.bs, params) for e in w)
    return HodographProblem(df, [SymmetryField.from_field(df, "t"),
                                 SymmetryField("w", df.bs, exprs, params)])
