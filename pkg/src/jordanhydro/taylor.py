"""Multivariate truncated Taylor polynomials of arbitrary order.

The cascade integrator needs derivatives of intermediate solutions along
the free coordinates to several orders (each layer consumes one partial of
the layer above), which order-2 :class:`~jordanhydro.jet.Jet` values cannot
supply.  A :class:`Taylor` stores normalized coefficients
``c_a = d^a f / a!`` for all multi-exponents ``|a| <= K`` in graded order,
so truncating to a lower order is a prefix slice.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product
from numbers import Real

import numpy as np

__all__ = ["Taylor"]


@lru_cache(maxsize=None)
def _monomials(d: int, K: int):
    exps = [e for e in product(range(K + 1), repeat=d) if sum(e) <= K]
    exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    index = {e: i for i, e in enumerate(exps)}
    return tuple(exps), index


@lru_cache(maxsize=None)
def _mul_table(d: int, K: int):
    exps, index = _monomials(d, K)
    ia, ib, ic = [], [], []
    for a, ea in enumerate(exps):
        for b, eb in enumerate(exps):
            ec = tuple(x + y for x, y in zip(ea, eb))
            if sum(ec) <= K:
                ia.append(a)
                ib.append(b)
                ic.append(index[ec])
    return np.array(ia), np.array(ib), np.array(ic), len(exps)


@lru_cache(maxsize=None)
def _partial_table(d: int, K: int, j: int):
    exps, _ = _monomials(d, K)
    _, low = _monomials(d, K - 1)
    src, dst, fac = [], [], []
    for a, e in enumerate(exps):
        if e[j] >= 1:
            f = list(e)
            f[j] -= 1
            src.append(a)
            dst.append(low[tuple(f)])
            fac.append(float(e[j]))
    return np.array(src, dtype=int), np.array(dst, dtype=int), np.array(fac)


class Taylor:
    __slots__ = ("c", "d", "K")
    __array_ufunc__ = None

    def __init__(self, coeffs, d: int, K: int):
        self.c = coeffs
        self.d = d
        self.K = K

    @classmethod
    def constant(cls, value, d: int, K: int) -> "Taylor":
        c = np.zeros(len(_monomials(d, K)[0]))
        c[0] = value
        return cls(c, d, K)

    @classmethod
    def variable(cls, value, j: int, d: int, K: int) -> "Taylor":
        t = cls.constant(value, d, K)
        if K >= 1:
            e = [0] * d
            e[j] = 1
            t.c[_monomials(d, K)[1][tuple(e)]] = 1.0
        return t

    @property
    def value(self) -> float:
        return float(self.c[0])

    def truncate(self, K: int) -> "Taylor":
        if K >= self.K:
            return self
        return Taylor(self.c[: len(_monomials(self.d, K)[0])].copy(), self.d, K)

    def partial(self, j: int) -> "Taylor":
        """``d/dx_j`` as a Taylor polynomial one order lower."""
        if self.K == 0:
            raise ValueError("an order-0 Taylor polynomial carries no derivatives")
        src, dst, fac = _partial_table(self.d, self.K, j)
        out = np.zeros(len(_monomials(self.d, self.K - 1)[0]))
        np.add.at(out, dst, fac * self.c[src])
        return Taylor(out, self.d, self.K - 1)

    def gradient(self) -> np.ndarray:
        if self.K == 0:
            raise ValueError("an order-0 Taylor polynomial carries no derivatives")
        return self.c[1:1 + self.d].copy()

    def derivative(self, exponent) -> float:
        """The partial derivative ``d^a f`` at the expansion point."""
        idx = _monomials(self.d, self.K)[1][tuple(exponent)]
        return float(self.c[idx]) * math.prod(math.factorial(x) for x in exponent)

    def __repr__(self) -> str:
        return f"Taylor(value={self.value!r}, d={self.d}, K={self.K})"

    # -- arithmetic -----------------------------------------------------

    def _align(self, other: "Taylor"):
        if other.d != self.d:
            raise ValueError("Taylor polynomials in different variable counts")
        K = min(self.K, other.K)
        return self.truncate(K), other.truncate(K), K

    def __neg__(self):
        return Taylor(-self.c, self.d, self.K)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Taylor):
            a, b, K = self._align(other)
            return Taylor(a.c + b.c, self.d, K)
        if isinstance(other, Real):
            c = self.c.copy()
            c[0] += other
            return Taylor(c, self.d, self.K)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (Taylor, Real)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, Real):
            return (-self) + other
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Taylor):
            # an exact zero stays exact to its own order
            if not self.c.any():
                return Taylor.constant(0.0, self.d, max(self.K, other.K) if not other.c.any()
                                       else self.K)
            if not other.c.any():
                return Taylor.constant(0.0, self.d, other.K)
            a, b, K = self._align(other)
            ia, ib, ic, m = _mul_table(self.d, K)
            out = np.bincount(ic, weights=a.c[ia] * b.c[ib], minlength=m)
            return Taylor(out, self.d, K)
        if isinstance(other, Real):
            return Taylor(self.c * other, self.d, self.K)
        return NotImplemented

    __rmul__ = __mul__

    def compose(self, coeffs) -> "Taylor":
        """``sum_k coeffs[k] (self - value)^k`` for a function's Taylor coefficients."""
        delta = Taylor(self.c.copy(), self.d, self.K)
        delta.c[0] = 0.0
        out = Taylor.constant(coeffs[self.K], self.d, self.K)
        for k in range(self.K - 1, -1, -1):
            out = out * delta + coeffs[k]
        return out

    def reciprocal(self) -> "Taylor":
        from .jet import DomainError

        x = self.value
        if x == 0.0:
            raise DomainError("division by zero")
        return self.compose([(-1.0) ** k / x ** (k + 1) for k in range(self.K + 1)])

    def __truediv__(self, other):
        if isinstance(other, Taylor):
            return self * other.reciprocal()
        if isinstance(other, Real):
            from .jet import DomainError

            if other == 0:
                raise DomainError("division by zero")
            return self * (1.0 / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, Real):
            return self.reciprocal() * other
        return NotImplemented

    def __pow__(self, other):
        from .jet import power

        return power(self, other)

    def __rpow__(self, other):
        from .jet import power

        return power(other, self)

    # -- elementary functions (called from jordanhydro.jet) -------------

    def apply(self, name: str, arg: float | None = None) -> "Taylor":
        from .jet import DomainError, _real_power

        x, K = self.value, self.K
        fact = [math.factorial(k) for k in range(K + 1)]
        if name == "exp":
            e = math.exp(x)
            coeffs = [e / fact[k] for k in range(K + 1)]
        elif name == "log":
            if x <= 0:
                raise DomainError(f"log of non-positive value {x!r}")
            coeffs = [math.log(x)] + [(-1.0) ** (k - 1) / (k * x ** k) for k in range(1, K + 1)]
        elif name in ("sin", "cos"):
            s, c = math.sin(x), math.cos(x)
            cyc = [s, c, -s, -c] if name == "sin" else [c, -s, -c, s]
            coeffs = [cyc[k % 4] / fact[k] for k in range(K + 1)]
        elif name == "abs":
            if x == 0.0 and K > 0:
                raise DomainError("abs is not differentiable at 0")
            sgn = 1.0 if x >= 0 else -1.0
            coeffs = [abs(x), sgn] + [0.0] * (K - 1)
            coeffs = coeffs[: K + 1]
        elif name == "power":
            c = float(arg)
            coeffs, falling = [], 1.0
            for k in range(K + 1):
                if falling == 0.0:
                    coeffs.append(0.0)
                else:
                    coeffs.append(falling * _real_power(x, c - k) / fact[k])
                falling *= c - k
        else:
            raise ValueError(f"unsupported function {name!r}")
        return self.compose(coeffs)
