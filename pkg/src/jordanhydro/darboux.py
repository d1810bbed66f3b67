"""Integration of compatible Pfaffian systems of Darboux type.

A :class:`PfaffianSystem` prescribes some first partials of its unknowns,
``d_j w_a = f_{a,j}(frame)``; the remaining ("free") partials are fixed by
initial data given on coordinate subspaces through a base point.  The
solution at a target is built by sweeping axis-aligned segments with
classical RK4.  When the free directions of different unknowns conflict so
that no sweep order exists (several blocks coupled through the same
equations) the contested coordinates are covered by a Goursat grid instead.

RHS callables receive a :class:`Frame`.  Besides the current coordinates
and unknown values, a frame resolves any first partial ``d(label, j)``: a
prescribed one through the system itself, a free one through the initial
data (if the unknown has not left its data subspace) or through the Taylor
coefficients carried along the integration.  Unknowns are Taylor
polynomials in the free coordinates, one order per cascade layer, so a
layer can differentiate the layers above it exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Mapping, Sequence

import numpy as np

from .blocks import BlockStructure
from .expr import Expr, FieldEvaluator, fold, free_variables, substitute
from .jet import value_of
from .taylor import Taylor

__all__ = [
    "IntegrationError",
    "PfaffianSystem",
    "InitialData",
    "Frame",
    "Solution",
    "integrate",
    "check_compatibility",
    "path_independence_test",
    "PathIndependence",
    "system_residual",
    "rhs_values",
]

Label = Hashable


class IntegrationError(RuntimeError):
    """The integrator cannot resolve a derivative or a sweep order."""


@dataclass
class PfaffianSystem:
    """``d_j w_a = f_{a,j}(frame)`` for the pairs ``(a, j)`` in ``rhs``.

    ``j`` is a 1-based flat coordinate index.  ``layers`` lists groups of
    unknowns such that each group's right-hand sides only involve its own
    and earlier groups; ``groups`` partitions the unknowns into subsystems
    that never reference each other and may be integrated separately.
    """

    bs: BlockStructure
    unknowns: tuple
    rhs: dict
    ctx: Any = None
    layers: tuple | None = None
    groups: tuple | None = None
    name: str = ""

    def __post_init__(self):
        self.unknowns = tuple(self.unknowns)
        known = set(self.unknowns)
        if len(known) != len(self.unknowns):
            raise ValueError("duplicate unknown labels")
        n = self.bs.n
        for a, j in self.rhs:
            if a not in known:
                raise ValueError(f"right-hand side for unknown {a!r} not in the system")
            if not 1 <= j <= n:
                raise ValueError(f"direction {j} outside 1..{n}")
        if self.layers is None:
            self.layers = (self.unknowns,)
        self.layers = tuple(tuple(g) for g in self.layers)
        if sorted(map(repr, (a for g in self.layers for a in g))) != sorted(map(repr, known)):
            raise ValueError("layers must partition the unknowns")
        if self.groups is None:
            self.groups = (self.unknowns,)
        self.groups = tuple(tuple(g) for g in self.groups)
        if sorted(map(repr, (a for g in self.groups for a in g))) != sorted(map(repr, known)):
            raise ValueError("groups must partition the unknowns")
        for a in self.unknowns:
            self._check_free_pattern(a)

    @property
    def prescribed_mask(self) -> frozenset:
        return frozenset(self.rhs)

    def free(self, a: Label) -> tuple[int, ...]:
        """1-based free directions of unknown ``a``."""
        return tuple(j for j in range(1, self.bs.n + 1) if (a, j) not in self.rhs)

    def prescribed(self, a: Label) -> tuple[int, ...]:
        return tuple(j for j in range(1, self.bs.n + 1) if (a, j) in self.rhs)

    def _check_free_pattern(self, a: Label):
        free = self.free(a)
        if not free:
            return
        mi = [self.bs.multi_index(j) for j in free]
        alpha = mi[0].alpha
        if any(x.alpha != alpha for x in mi) or [x.i for x in mi] != list(range(1, len(mi) + 1)):
            labels = ", ".join(self.bs.label(j) for j in free)
            raise ValueError(
                f"free directions of {a!r} ({labels}) are not a leading run of one block")

    def restrict(self, labels: Sequence[Label]) -> "PfaffianSystem":
        """The closed subsystem for ``labels`` (caller guarantees closure)."""
        keep = set(labels)
        layers = tuple(tuple(a for a in g if a in keep) for g in self.layers)
        groups = tuple(tuple(a for a in g if a in keep) for g in self.groups)
        return PfaffianSystem(
            self.bs, tuple(a for a in self.unknowns if a in keep),
            {k: f for k, f in self.rhs.items() if k[0] in keep}, self.ctx,
            tuple(g for g in layers if g), tuple(g for g in groups if g), self.name)

    def layer_depth(self, labels: Sequence[Label]) -> int:
        keep = set(labels)
        return sum(1 for g in self.layers if keep.intersection(g))


@dataclass
class InitialData:
    """Data for the free partials: one expression per unknown in its free variables."""

    base_point: tuple
    functions: dict
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.base_point = tuple(float(x) for x in self.base_point)
        self.params = dict(self.params)
        self._eval: dict = {}

    @classmethod
    def from_field(cls, system: PfaffianSystem, solution: Mapping[Label, Expr],
                   base_point: Sequence[float], params: Mapping[str, float] | None = None
                   ) -> "InitialData":
        """Restrict a known solution to each unknown's free directions."""
        funcs = {}
        for a in system.unknowns:
            free = set(system.free(a))
            fixed = {k + 1: float(base_point[k]) for k in range(system.bs.n) if k + 1 not in free}
            funcs[a] = fold(substitute(solution[a], fixed))
        return cls(tuple(base_point), funcs, dict(params or {}))

    def validate(self, system: PfaffianSystem):
        if len(self.base_point) != system.bs.n:
            raise ValueError(f"base point needs {system.bs.n} coordinates")
        for a in system.unknowns:
            if a not in self.functions:
                raise ValueError(f"no initial data for unknown {a!r}")
            free = set(system.free(a))
            for v in free_variables(self.functions[a], system.bs):
                if system.bs.flat_index(v.i, v.alpha) not in free:
                    raise ValueError(
                        f"initial data for {a!r} depends on u^{v}, which is not a free direction")

    def evaluator(self, a: Label, n: int) -> FieldEvaluator:
        ev = self._eval.get(a)
        if ev is None:
            f = self.functions[a]
            if not isinstance(f, Expr):
                raise TypeError(f"initial data for {a!r} must be an expression")
            ev = self._eval[a] = FieldEvaluator([f], n, self.params)
        return ev

    def value(self, a: Label, u: Sequence):
        return self.evaluator(a, len(u))._f[0](u)

    def partial(self, a: Label, j: int, u: Sequence):
        return self.evaluator(a, len(u))._df[0][j - 1](u)

    def __add__(self, other: "InitialData") -> "InitialData":
        from .expr import add

        if self.base_point != other.base_point:
            raise ValueError("initial data with different base points")
        funcs = {a: add(self.functions[a], other.functions[a]) for a in self.functions}
        return InitialData(self.base_point, funcs, {**self.params, **other.params})


class Frame:
    """Evaluation context handed to the right-hand sides."""

    def __init__(self, system: PfaffianSystem, u: list, w: dict, *, data: InitialData | None,
                 on_manifold=frozenset(), settled=frozenset(), var_index=None, exact=False):
        self.system = system
        self.bs = system.bs
        self.ctx = system.ctx
        self.u = u
        self.w = w
        self._data = data
        self._on = on_manifold
        self._settled = settled
        self._var = var_index or {}
        self._exact = exact
        self._cache: dict = {}
        self._busy: set = set()
        self._store: dict = {}

    def cached(self, key, fn: Callable):
        """Memoize a per-point quantity (e.g. Christoffel symbols)."""
        if key not in self._store:
            self._store[key] = fn()
        return self._store[key]

    def gamma(self):
        return self.cached("gamma", lambda: self.ctx.christoffel(self.u))

    def value(self, a: Label):
        return self.w[a]

    def d(self, a: Label, j: int):
        """First partial ``d w_a / d u^j`` (``j`` 1-based) at this frame."""
        key = (a, j)
        if key in self._cache:
            return self._cache[key]
        if self._exact:
            val = self._taylor_partial(a, j)
        elif key in self.system.rhs:
            if key in self._busy:
                raise IntegrationError(f"right-hand side for d_{j} {a!r} refers to itself")
            self._busy.add(key)
            try:
                val = self.system.rhs[key](self)
            finally:
                self._busy.discard(key)
        elif a in self._on:
            val = self._data.partial(a, j, self.u)
        else:
            if j - 1 not in self._settled:
                raise IntegrationError(
                    f"free partial d_{j} {a!r} requested before coordinate {j} is settled")
            val = self._taylor_partial(a, j)
        self._cache[key] = val
        return val

    def _taylor_partial(self, a: Label, j: int):
        x = self.w[a]
        k = self._var.get(j - 1)
        if k is None:
            if isinstance(x, Taylor) or not self._exact:
                raise IntegrationError(f"no derivative information for {a!r} along u^{j}")
            return 0.0
        if not isinstance(x, Taylor) or x.K == 0:
            raise IntegrationError(
                f"derivative of {a!r} along u^{j} needs a higher jet order")
        return x.partial(k)


@dataclass
class Solution:
    """Values of the unknowns at a target, plus the frame they live in."""

    target: tuple
    values: dict
    frame: Frame
    plan: tuple
    steps: dict
    jets: dict = field(default_factory=dict)

    def grad(self, a: Label) -> np.ndarray:
        return np.array([value_of(self.frame.d(a, j)) for j in range(1, len(self.target) + 1)])

    def rhs_value(self, a: Label, j: int) -> float:
        return _rhs_at(self, a, j)

    def __getitem__(self, a: Label) -> float:
        return self.values[a]


# -- planning ---------------------------------------------------------------


def _sweep_order(system: PfaffianSystem, group: Sequence[Label], prefer: str):
    """Axis order for a group, or ``None`` when the free directions conflict."""
    n = system.bs.n
    free = {a: {j - 1 for j in system.free(a)} for a in group}
    common = set.intersection(*free.values()) if free else set()
    nodes = [k for k in range(n) if k not in common]
    succ = {k: set() for k in nodes}
    indeg = {k: 0 for k in nodes}
    for a in group:
        pres = set(range(n)) - free[a]
        for f in free[a] - common:
            for p in pres:
                if p not in succ[f]:
                    succ[f].add(p)
                    indeg[p] += 1
    sign = 1 if prefer == "low" else -1
    heap = [sign * k for k in nodes if indeg[k] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        k = sign * heapq.heappop(heap)
        order.append(k)
        for p in succ[k]:
            indeg[p] -= 1
            if indeg[p] == 0:
                heapq.heappush(heap, sign * p)
    if len(order) != len(nodes):
        return common, None
    return common, order


def _steps_for(length: float, step: float) -> int:
    return max(1, math.ceil(abs(length) / step - 1e-9))


# -- integration ------------------------------------------------------------


class _State:
    def __init__(self, system, group, data, target, step, order, n_steps, detour=0.0,
                 jet_order=None):
        self.system = system
        self.detour = float(detour)
        self.group = tuple(group)
        self.data = data
        self.target = tuple(float(t) for t in target)
        self.step = step
        self.n_steps = dict(n_steps or {})
        self.used_steps: dict = {}
        n = system.bs.n
        self.free = {a: {j - 1 for j in system.free(a)} for a in group}
        self.pres = {a: set(range(n)) - self.free[a] for a in group}
        if jet_order is None:
            fcoords = sorted(set().union(*self.free.values())) if group else []
            K = max(1, system.layer_depth(group))
        else:
            # every coordinate is a Taylor variable; the last layer keeps jet_order
            fcoords = list(range(n))
            K = jet_order + max(1, system.layer_depth(group)) - 1
        self.var = {k: i for i, k in enumerate(fcoords)}
        self.d = len(fcoords)
        self.K = order if order is not None else K

    def coord(self, k: int, value: float):
        if k in self.var:
            return Taylor.variable(value, self.var[k], self.d, self.K)
        return value

    def const(self, k: int, value: float):
        if k in self.var:
            return Taylor.constant(value, self.d, self.K)
        return value

    def value(self, a, u):
        # constant data compiles to a float; lift it so partials stay defined
        v = self.data.value(a, u)
        if self.d and not isinstance(v, Taylor):
            return Taylor.constant(float(v), self.d, self.K)
        return v

    def frame(self, u, w, on, settled) -> Frame:
        return Frame(self.system, u, w, data=self.data, on_manifold=frozenset(on),
                     settled=frozenset(settled), var_index=self.var)

    def steps(self, k: int) -> int:
        N = self.n_steps.get(k)
        if N is None:
            N = _steps_for(self.target[k] - self.data.base_point[k], self.step)
        self.used_steps[k] = N
        return N


def _sweep(st: _State, u: list, w: dict, on: set, settled: set, k: int):
    """Integrate the unknowns prescribed along axis ``k`` from base to target.

    With ``st.detour > 0`` the axis is first swept past the target by that
    fraction of its length and then back.
    """
    base = st.data.base_point[k]
    T = st.coord(k, st.target[k])
    if st.detour > 0:
        L = st.target[k] - base
        W = T + (T - base) * st.detour
        legs = [(base, W, _steps_for(L * (1 + st.detour), st.step)),
                (W, T, _steps_for(L * st.detour, st.step))]
        st.used_steps[k] = legs[0][2] + legs[1][2]
    else:
        legs = [(base, T, st.steps(k))]
    moving = [a for a in st.group if k in st.pres[a]]
    riding = [a for a in st.group if k not in st.pres[a]]
    if any(a not in on for a in riding):
        raise IntegrationError(f"unknown left its data subspace before axis {k + 1}")
    on_sweep = on - set(moving)
    y = {a: w[a] for a in moving}

    def rates(s, yy):
        uu = list(u)
        uu[k] = s
        ww = dict(w)
        ww.update(yy)
        for a in riding:
            ww[a] = st.value(a, uu)
        fr = st.frame(uu, ww, on_sweep, settled)
        return {a: fr.d(a, k + 1) for a in moving}

    for start, end, N in legs:
        h = (end - start) * (1.0 / N)
        for m in range(N):
            s0 = start + h * m
            k1 = rates(s0, y)
            k2 = rates(s0 + h * 0.5, {a: y[a] + h * 0.5 * k1[a] for a in moving})
            k3 = rates(s0 + h * 0.5, {a: y[a] + h * 0.5 * k2[a] for a in moving})
            k4 = rates(start + h * (m + 1), {a: y[a] + h * k3[a] for a in moving})
            y = {a: y[a] + h * (1.0 / 6.0) * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])
                 for a in moving}
    u[k] = T
    w.update(y)
    for a in riding:
        w[a] = st.value(a, u)
    on -= set(moving)
    settled.add(k)


def _goursat(st: _State, u: list, contested: list, settled: set, scale: int, last: bool):
    """Trapezoidal marching over the grid spanned by the contested coordinates."""
    base = st.data.base_point
    Ns = {c: st.steps(c) * scale for c in contested}
    Ts = {c: st.coord(c, st.target[c]) for c in contested}
    hs = {c: (Ts[c] - base[c]) * (1.0 / Ns[c]) for c in contested}
    shape = [Ns[c] + 1 for c in contested]
    vals: dict = {}
    rates: dict = {}

    def position(J):
        uu = list(u)
        for c, jc in zip(contested, J):
            uu[c] = Ts[c] if jc == Ns[c] else base[c] + hs[c] * jc
        return uu

    for J in np.ndindex(*shape):
        uu = position(J)
        on = {a for a in st.group
              if all(J[i] == 0 for i, c in enumerate(contested) if c in st.pres[a])}
        w = {a: st.value(a, uu) for a in on}
        moving = {}
        for a in st.group:
            if a in on:
                continue
            dirs = [i for i, c in enumerate(contested) if c in st.pres[a] and J[i] > 0]
            i = dirs[-1] if last else dirs[0]
            prev = tuple(x - (1 if q == i else 0) for q, x in enumerate(J))
            moving[a] = (i, vals[prev][a], rates[prev][(a, contested[i])])
        guess = {a: wp + hs[contested[i]] * fp for a, (i, wp, fp) in moving.items()}
        for _ in range(60):
            fr = st.frame(uu, {**w, **guess}, on, settled)
            new = {a: wp + hs[contested[i]] * 0.5 * (fp + fr.d(a, contested[i] + 1))
                   for a, (i, wp, fp) in moving.items()}
            delta = max((abs(value_of(new[a]) - value_of(guess[a])) for a in new), default=0.0)
            scale_ = max((abs(value_of(x)) for x in new.values()), default=0.0)
            guess = new
            if delta <= 1e-15 * (1.0 + scale_):
                break
        else:
            raise IntegrationError("Goursat fixed-point iteration did not converge")
        w.update(guess)
        fr = st.frame(uu, w, on, settled)
        vals[J] = w
        rates[J] = {(a, c): fr.d(a, c + 1) for a in st.group for c in contested
                    if c in st.pres[a]}
    return vals[tuple(s - 1 for s in shape)]


def _integrate_group(system, group, data, target, step, order, prefer, n_steps, detour,
                     jet_order):
    st = _State(system, group, data, target, step, order, n_steps, detour, jet_order)
    n = system.bs.n
    base = data.base_point
    common, order_ = _sweep_order(system, group, prefer)
    u = [st.coord(k, st.target[k]) if k in common else st.const(k, base[k]) for k in range(n)]
    settled = set(common)
    on = set(group)
    w = {a: st.value(a, u) for a in group}
    if order_ is not None:
        plan = tuple(order_)
        for k in order_:
            _sweep(st, u, w, on, settled, k)
    else:
        contested = sorted(set().union(*st.free.values()) - common)
        rest = [k for k in range(n) if k not in common and k not in contested]
        if prefer != "low":
            rest.reverse()
        last = prefer == "low"
        coarse = _goursat(st, u, contested, settled, 1, last)
        fine = _goursat(st, u, contested, settled, 2, last)
        w = {a: (4.0 * fine[a] - coarse[a]) * (1.0 / 3.0) for a in group}
        for c in contested:
            u[c] = st.coord(c, st.target[c])
            settled.add(c)
        on = {a for a in group if not (st.pres[a] & set(contested))}
        for a in on:
            w[a] = st.value(a, u)
        plan = (tuple(contested),) + tuple(rest)
        for k in rest:
            _sweep(st, u, w, on, settled, k)
    return u, w, on, settled, st, plan


def integrate(system: PfaffianSystem, data: InitialData, target: Sequence[float],
              step: float = 1e-2, *, order: int | None = None, prefer: str = "low",
              n_steps: Mapping[int, int] | None = None, detour: float = 0.0,
              jet_order: int | None = None) -> Solution:
    """Solve at ``target``.

    ``prefer`` picks among valid sweep orders: ``"low"`` sweeps lower flat
    indices first (the canonical order), ``"high"`` the reverse.  ``order``
    overrides the Taylor order carried along (default: one per layer).
    ``n_steps`` pins the number of RK4 steps per 0-based axis.  ``detour``
    sweeps every axis past its target by that fraction and back.  With
    ``jet_order`` every coordinate is carried as a Taylor variable and
    ``Solution.jets`` holds the unknowns as Taylor polynomials in all
    coordinates of at least that order (derivatives of the discrete solution).
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if len(target) != system.bs.n:
        raise ValueError(f"target needs {system.bs.n} coordinates")
    data.validate(system)
    if not all(math.isfinite(float(t)) for t in target):
        raise ValueError("target has non-finite coordinates")
    u_all: list | None = None
    w_all: dict = {}
    on_all: set = set()
    plans, steps = [], {}
    var_index = None
    for group in system.groups:
        u, w, on, settled, st, plan = _integrate_group(
            system, group, data, target, step, order, prefer, n_steps, detour, jet_order)
        w_all.update(w)
        on_all |= on
        plans.append(plan)
        steps.update(st.used_steps)
        if u_all is None or st.d > len(var_index):
            u_all, var_index = u, st.var
    if len(system.groups) > 1:
        # groups carry different Taylor variables; evaluate them in their own frames
        frame = _MultiFrame(system, data, target, w_all, on_all, order, n_steps, step, prefer,
                            jet_order)
    else:
        frame = Frame(system, u_all, w_all, data=data, on_manifold=frozenset(on_all),
                      settled=frozenset(range(system.bs.n)), var_index=var_index)
    values = {a: value_of(x) for a, x in w_all.items()}
    jets = dict(w_all) if jet_order is not None else {}
    return Solution(tuple(float(t) for t in target), values, frame, tuple(plans), steps, jets)


class _MultiFrame:
    """Frame facade over independently integrated groups."""

    def __init__(self, system, data, target, w, on, order, n_steps, step, prefer,
                 jet_order=None):
        self.system = system
        self._frames = {}
        for group in system.groups:
            sub = system.restrict(group)
            st = _State(sub, group, data, target, step, order, n_steps, jet_order=jet_order)
            u = [st.coord(k, float(target[k])) for k in range(system.bs.n)]
            fr = Frame(sub, u, {a: w[a] for a in group}, data=data,
                       on_manifold=frozenset(on & set(group)),
                       settled=frozenset(range(system.bs.n)), var_index=st.var)
            for a in group:
                self._frames[a] = fr
        self.w = w

    def d(self, a, j):
        return self._frames[a].d(a, j)

    def frame_of(self, a) -> Frame:
        return self._frames[a]


# -- diagnostics --------------------------------------------------------------


def _rhs_at(sol: Solution, a, j):
    fr = sol.frame.frame_of(a) if isinstance(sol.frame, _MultiFrame) else sol.frame
    return value_of(fr.system.rhs[(a, j)](fr))


def check_compatibility(system: PfaffianSystem, data: InitialData, p: Sequence[float],
                        h: float = 1e-4, step: float = 1e-2) -> dict:
    """Central-difference cross-derivative residual ``|D_k f_{a,j} - D_j f_{a,k}|``.

    ``D_k f_{a,j}`` is the derivative of the prescribed partial along the
    integrated solution, so it includes the contribution through ``w``.
    """
    p = [float(x) for x in p]
    n = system.bs.n
    sol = integrate(system, data, p, step)
    pinned = dict(sol.steps)
    shifted = {}
    dirs = sorted({j for (_, j) in system.rhs})
    for k in dirs:
        for sgn in (1, -1):
            q = list(p)
            q[k - 1] += sgn * h
            shifted[(k, sgn)] = integrate(system, data, q, step, n_steps=pinned)
    worst, where = 0.0, None
    for a in system.unknowns:
        pres = system.prescribed(a)
        for x, j in enumerate(pres):
            for k in pres[x + 1:]:
                dk = (_rhs_at(shifted[(k, 1)], a, j) - _rhs_at(shifted[(k, -1)], a, j)) / (2 * h)
                dj = (_rhs_at(shifted[(j, 1)], a, k) - _rhs_at(shifted[(j, -1)], a, k)) / (2 * h)
                r = abs(dk - dj)
                if r > worst or where is None:
                    worst, where = r, (a, j, k)
    return {"residual": worst, "where": where, "n": n}


@dataclass
class PathIndependence:
    """Differences between solutions reached along different paths.

    ``reversed`` compares the canonical and the reversed sweep order (on
    ``compared``, see :func:`path_independence_test`); this is the
    ``discrepancy``.  ``detour`` compares the canonical path with one that
    overshoots every axis and comes back; the overshoot is retraced with
    the same step, so its leading O(step^4) error cancels and it is kept as
    a separate diagnostic.
    """

    reversed: float
    detour: float
    compared: tuple
    plans: tuple

    @property
    def discrepancy(self) -> float:
        return self.reversed

    def as_dict(self) -> dict:
        return {"discrepancy": self.discrepancy, "reversed": self.reversed,
                "detour": self.detour, "compared": [str(a) for a in self.compared],
                "plans": [repr(p) for p in self.plans]}


def _plans(system):
    out = []
    for prefer in ("low", "high"):
        out.append(tuple(_sweep_order(system, g, prefer)[1] for g in system.groups))
    return out


def _max_diff(a: Solution, b: Solution, labels) -> float:
    return max(abs(a.values[x] - b.values[x]) for x in labels)


def path_independence_test(system: PfaffianSystem, data: InitialData,
                           target: Sequence[float], step: float = 1e-2,
                           detour: float = 0.5) -> PathIndependence:
    """Compare the canonical path with a reversed sweep order and with a detour.

    When reversing the whole system changes nothing (every unknown's sweep
    order is forced), the largest leading run of layers whose order can be
    reversed is compared instead; with no alternative order at all that
    part is exactly 0.  Reversal also vanishes exactly when the reordered
    sweeps do not interact, so the detour path (each axis overshot by
    ``detour`` of its length, then swept back) is reported as well.
    """
    canonical = integrate(system, data, target, step)
    other = integrate(system, data, target, step, detour=detour)
    det = _max_diff(canonical, other, system.unknowns)
    candidates = [system]
    for L in range(len(system.layers) - 1, 0, -1):
        candidates.append(system.restrict([a for g in system.layers[:L] for a in g]))
    for sub in candidates:
        low, high = _plans(sub)
        goursat = any(p is None for p in low)
        if low != high or goursat:
            a = canonical if sub is system else integrate(sub, data, target, step, prefer="low")
            b = integrate(sub, data, target, step, prefer="high")
            return PathIndependence(_max_diff(a, b, sub.unknowns), det, sub.unknowns,
                                    (a.plan, b.plan))
    return PathIndependence(0.0, det, (), ())


def system_residual(system: PfaffianSystem, field: Mapping[Label, Expr], p: Sequence[float],
                    params: Mapping[str, float] | None = None) -> dict:
    """How far a closed-form field is from solving the system at ``p``.

    All partials on the right-hand sides are taken from the field itself.
    """
    n = system.bs.n
    u = [Taylor.variable(float(x), k, n, 2) for k, x in enumerate(p)]
    w = {}
    for a in system.unknowns:
        f = field[a]
        if isinstance(f, Expr):
            w[a] = FieldEvaluator([f], n, params)._f[0](u)
        else:
            w[a] = f(u)
        if not isinstance(w[a], Taylor):
            w[a] = Taylor.constant(float(w[a]), n, 2)
    fr = Frame(system, u, w, data=None, var_index={k: k for k in range(n)}, exact=True)
    worst, where = 0.0, None
    for (a, j), f in system.rhs.items():
        r = abs(value_of(w[a].partial(j - 1)) - value_of(f(fr)))
        if r > worst or where is None:
            worst, where = r, (a, j)
    return {"residual": worst, "where": where}


def rhs_values(system: PfaffianSystem, p: Sequence[float], w: Mapping[Label, float]) -> dict:
    """All prescribed partials at ``p`` for given unknown values.

    Right-hand sides that need a free partial raise :class:`IntegrationError`.
    """
    fr = Frame(system, [float(x) for x in p], dict(w), data=None)
    return {key: value_of(f(fr)) for key, f in system.rhs.items()}
