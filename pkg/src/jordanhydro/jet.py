"""Truncated Taylor jets for forward-mode differentiation.

A :class:`Jet` carries a value together with its gradient (order 1) and
Hessian (order 2) with respect to ``n`` independent variables.  Jets mix
freely with plain floats, which act as constants, so numerical code written
against ordinary arithmetic runs unchanged on jets.
"""

from __future__ import annotations

import math
from numbers import Real

import numpy as np

__all__ = [
    "DomainError",
    "Jet",
    "value_of",
    "variables",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "fabs",
    "power",
]


class DomainError(ArithmeticError):
    """Raised when a function is evaluated outside its real domain."""


class Jet:
    """Value with derivatives up to order 0, 1 or 2."""

    __slots__ = ("value", "grad", "hess")
    __array_ufunc__ = None  # keep numpy scalars from swallowing jets

    def __init__(self, value, grad=None, hess=None):
        self.value = float(value)
        self.grad = None if grad is None else np.asarray(grad, dtype=float)
        self.hess = None if hess is None or grad is None else np.asarray(hess, dtype=float)

    @property
    def order(self) -> int:
        if self.grad is None:
            return 0
        return 1 if self.hess is None else 2

    @property
    def n(self) -> int:
        return 0 if self.grad is None else self.grad.shape[0]

    @classmethod
    def constant(cls, value, n: int, order: int) -> "Jet":
        grad = np.zeros(n) if order >= 1 else None
        hess = np.zeros((n, n)) if order >= 2 else None
        return cls(value, grad, hess)

    @classmethod
    def variable(cls, value, index: int, n: int, order: int = 1) -> "Jet":
        grad = np.zeros(n)
        grad[index] = 1.0
        hess = np.zeros((n, n)) if order >= 2 else None
        return cls(value, grad, hess)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        if order == 0:
            return Jet(self.value)
        return Jet(self.value, self.grad)

    def partial(self, k: int) -> "Jet":
        """The jet of ``d/du_k`` of this jet, one order lower."""
        if self.grad is None:
            raise ValueError("an order-0 jet carries no derivatives")
        if self.hess is None:
            return Jet(self.grad[k])
        return Jet(self.grad[k], self.hess[k])

    def __repr__(self) -> str:
        parts = [f"value={self.value!r}"]
        if self.grad is not None:
            parts.append(f"grad={self.grad.tolist()!r}")
        if self.hess is not None:
            parts.append(f"hess={self.hess.tolist()!r}")
        return f"Jet({', '.join(parts)})"

    # -- arithmetic -----------------------------------------------------

    def _chain(self, f0, f1, f2) -> "Jet":
        """Compose a scalar function with known derivatives f0, f1, f2."""
        if self.grad is None:
            return Jet(f0)
        g = f1 * self.grad
        if self.hess is None:
            return Jet(f0, g)
        return Jet(f0, g, f1 * self.hess + f2 * np.outer(self.grad, self.grad))

    def __neg__(self):
        if self.grad is None:
            return Jet(-self.value)
        return Jet(-self.value, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            a, b = self.truncate(order), other.truncate(order)
            if order == 0:
                return Jet(a.value + b.value)
            return Jet(a.value + b.value, a.grad + b.grad,
                       None if order < 2 else a.hess + b.hess)
        if isinstance(other, Real):
            return Jet(self.value + other, self.grad, self.hess)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (Jet, Real)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, Real):
            return (-self) + other
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            a, b = self.truncate(order), other.truncate(order)
            v = a.value * b.value
            if order == 0:
                return Jet(v)
            g = a.value * b.grad + b.value * a.grad
            if order == 1:
                return Jet(v, g)
            cross = np.outer(a.grad, b.grad)
            return Jet(v, g, a.value * b.hess + b.value * a.hess + cross + cross.T)
        if isinstance(other, Real):
            if self.grad is None:
                return Jet(self.value * other)
            return Jet(self.value * other, self.grad * other,
                       None if self.hess is None else self.hess * other)
        return NotImplemented

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        x = self.value
        if x == 0.0:
            raise DomainError("division by zero")
        r = 1.0 / x
        return self._chain(r, -r * r, 2.0 * r * r * r)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        if isinstance(other, Real):
            if other == 0:
                raise DomainError("division by zero")
            return self * (1.0 / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, Real):
            return self.reciprocal() * other
        return NotImplemented

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)


def value_of(x) -> float:
    v = getattr(x, "value", None)
    return float(x) if v is None else v


def _is_taylor(x) -> bool:
    return hasattr(x, "apply")


def variables(point, order: int = 1) -> list[Jet]:
    """Seed independent-variable jets at ``point``."""
    n = len(point)
    return [Jet.variable(value_of(v), k, n, order) for k, v in enumerate(point)]


# -- elementary functions over floats and jets ---------------------------


def sin(x):
    if _is_taylor(x):
        return x.apply("sin")
    if isinstance(x, Jet):
        s, c = math.sin(x.value), math.cos(x.value)
        return x._chain(s, c, -s)
    return math.sin(x)


def cos(x):
    if _is_taylor(x):
        return x.apply("cos")
    if isinstance(x, Jet):
        s, c = math.sin(x.value), math.cos(x.value)
        return x._chain(c, -s, -c)
    return math.cos(x)


def exp(x):
    if _is_taylor(x):
        return x.apply("exp")
    if isinstance(x, Jet):
        e = math.exp(x.value)
        return x._chain(e, e, e)
    return math.exp(x)


def log(x):
    if _is_taylor(x):
        return x.apply("log")
    v = value_of(x)
    if v <= 0.0:
        raise DomainError(f"log of non-positive value {v!r}")
    if isinstance(x, Jet):
        return x._chain(math.log(v), 1.0 / v, -1.0 / (v * v))
    return math.log(v)


def sqrt(x):
    v = value_of(x)
    if v < 0.0:
        raise DomainError(f"sqrt of negative value {v!r}")
    if _is_taylor(x):
        if v == 0.0 and x.K > 0:
            raise DomainError("sqrt is not differentiable at 0")
        return x.apply("power", 0.5)
    if isinstance(x, Jet):
        if v == 0.0 and x.order > 0:
            raise DomainError("sqrt is not differentiable at 0")
        s = math.sqrt(v)
        return x._chain(s, 0.5 / s if s else 0.0, -0.25 / (s * v) if s else 0.0)
    return math.sqrt(v)


def fabs(x):
    if _is_taylor(x):
        return x.apply("abs")
    if isinstance(x, Jet):
        sgn = math.copysign(1.0, x.value) if x.value != 0.0 else 0.0
        return x._chain(abs(x.value), sgn, 0.0)
    return abs(x)


def _real_power(x: float, c: float) -> float:
    if x == 0.0:
        if c == 0.0:
            return 1.0
        if c < 0.0:
            raise DomainError("zero raised to a negative power")
        return 0.0
    if x < 0.0 and not float(c).is_integer():
        raise DomainError(f"negative base {x!r} with non-integer exponent {c!r}")
    try:
        return float(x) ** c
    except OverflowError as exc:
        raise DomainError(str(exc)) from None


def power(x, y):
    """``x ** y`` with ``0 ** 0 == 1`` and real-domain checking."""
    if _is_taylor(y) and y.K > 0:
        if value_of(x) <= 0.0:
            raise DomainError(f"variable exponent requires a positive base, got {value_of(x)!r}")
        return exp(y * log(x))
    if _is_taylor(x):
        return x.apply("power", value_of(y))
    if isinstance(y, Jet) and y.order > 0:
        if isinstance(x, Jet):
            order = min(x.order, y.order)
        else:
            order = y.order
            x = Jet.constant(x, y.n, order)
        if x.value <= 0.0:
            raise DomainError(f"variable exponent requires a positive base, got {x.value!r}")
        return exp(y * log(x.truncate(order)))
    c = value_of(y)
    if not isinstance(x, Jet):
        return _real_power(x, c)
    v = x.value
    f0 = _real_power(v, c)
    if x.order == 0:
        return Jet(f0)
    f1 = 0.0 if c == 0.0 else c * _real_power(v, c - 1.0)
    f2 = 0.0 if c in (0.0, 1.0) else c * (c - 1.0) * _real_power(v, c - 2.0)
    return x._chain(f0, f1, f2)
