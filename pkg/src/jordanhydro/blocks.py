"""Jordan-block bookkeeping and the Toeplitz product in canonical coordinates.

Coordinates ``u^{i(alpha)}`` are labelled by an in-block index ``i`` and a
block label ``alpha``; both are 1-based in every public function.  The flat
position of ``i(alpha)`` is ``m_1 + ... + m_{alpha-1} + i``.  Internally the
arrays are 0-based.

The product has structure constants
``c^{i(a)}_{j(b)k(g)} = delta_ab delta_ag delta^i_{j+k-1}``, so each block
multiplies like a truncated power series.  All product helpers work on any
scalar type with field arithmetic (floats or :class:`~jordanhydro.jet.Jet`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "BlockStructure",
    "MultiIndex",
    "flat_index",
    "multi_index",
    "structure_constant",
    "circ_product",
    "mult_operator",
    "unit_vector",
    "euler_field",
    "c_symmetry_residual",
    "hankel_generators",
]


class MultiIndex(NamedTuple):
    i: int
    alpha: int

    def __str__(self) -> str:
        return f"{self.i}({self.alpha})"


@dataclass(frozen=True, init=False)
class BlockStructure:
    sizes: tuple[int, ...]
    _offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __init__(self, sizes: Sequence[int]):
        sizes = tuple(int(m) for m in sizes)
        if not sizes:
            raise ValueError("a block structure needs at least one block")
        if any(m < 1 for m in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(sizes)[:-1]]))
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "_offsets", offsets)

    @property
    def r(self) -> int:
        return len(self.sizes)

    @cached_property
    def n(self) -> int:
        return sum(self.sizes)

    def size(self, alpha: int) -> int:
        return self.sizes[alpha - 1]

    def flat_index(self, i: int, alpha: int) -> int:
        if not 1 <= alpha <= self.r:
            raise IndexError(f"block {alpha} outside 1..{self.r}")
        if not 1 <= i <= self.sizes[alpha - 1]:
            raise IndexError(f"index {i} outside 1..{self.sizes[alpha - 1]} in block {alpha}")
        return self._offsets[alpha - 1] + i

    def multi_index(self, k: int) -> MultiIndex:
        if not 1 <= k <= self.n:
            raise IndexError(f"flat index {k} outside 1..{self.n}")
        for alpha in range(self.r, 0, -1):
            if k > self._offsets[alpha - 1]:
                return MultiIndex(k - self._offsets[alpha - 1], alpha)
        raise AssertionError("unreachable")

    # 0-based helpers used by the numerical modules
    def pos(self, i: int, alpha: int) -> int:
        """0-based array position of ``i(alpha)``; no range check beyond blocks."""
        return self._offsets[alpha - 1] + i - 1

    @cached_property
    def block_of(self) -> tuple[int, ...]:
        return tuple(self.multi_index(k).alpha for k in range(1, self.n + 1))

    @cached_property
    def index_in_block(self) -> tuple[int, ...]:
        return tuple(self.multi_index(k).i for k in range(1, self.n + 1))

    def indices(self):
        """All multi-indices in flat order."""
        return [self.multi_index(k) for k in range(1, self.n + 1)]

    def label(self, k: int) -> str:
        """Serialized ``i(alpha)`` label of the 1-based flat index ``k``."""
        return str(self.multi_index(k))

    @cached_property
    def structure_constants(self) -> np.ndarray:
        """Dense array ``c[i, j, k]`` of ``c^i_{jk}`` (0-based)."""
        n = self.n
        c = np.zeros((n, n, n))
        for alpha in range(1, self.r + 1):
            m = self.size(alpha)
            for j in range(1, m + 1):
                for k in range(1, m + 2 - j):
                    c[self.pos(j + k - 1, alpha), self.pos(j, alpha), self.pos(k, alpha)] = 1.0
        return c

    def sorted(self) -> tuple["BlockStructure", tuple[int, ...]]:
        """Blocks in non-increasing size and the permutation applied (old labels)."""
        perm = tuple(sorted(range(1, self.r + 1), key=lambda a: -self.size(a)))
        return BlockStructure([self.size(a) for a in perm]), perm


def flat_index(bs: BlockStructure, mi: MultiIndex) -> int:
    return bs.flat_index(mi.i, mi.alpha)


def multi_index(bs: BlockStructure, k: int) -> MultiIndex:
    return bs.multi_index(k)


def structure_constant(bs: BlockStructure, upper: MultiIndex, lower1: MultiIndex,
                       lower2: MultiIndex) -> int:
    for mi in (upper, lower1, lower2):
        bs.flat_index(mi.i, mi.alpha)
    if upper.alpha == lower1.alpha == lower2.alpha and upper.i == lower1.i + lower2.i - 1:
        return 1
    return 0


def _check_len(bs: BlockStructure, *vecs):
    for v in vecs:
        if len(v) != bs.n:
            raise ValueError(f"expected a vector of length {bs.n}, got {len(v)}")


def circ_product(bs: BlockStructure, X: Sequence, Y: Sequence) -> list:
    """``(X o Y)^{i(a)} = sum_{j+k=i+1} X^{j(a)} Y^{k(a)}``."""
    _check_len(bs, X, Y)
    out = []
    for alpha in range(1, bs.r + 1):
        off = bs.pos(1, alpha)
        for i in range(1, bs.size(alpha) + 1):
            acc = 0.0
            for j in range(1, i + 1):
                acc = acc + X[off + j - 1] * Y[off + i - j]
            out.append(acc)
    return out


def mult_operator(bs: BlockStructure, X: Sequence) -> np.ndarray:
    """Matrix ``V^i_j = c^i_{jk} X^k``: lower-triangular Toeplitz blocks."""
    _check_len(bs, X)
    generic = any(not isinstance(x, (int, float, np.floating, np.integer)) for x in X)
    V = np.zeros((bs.n, bs.n), dtype=object if generic else float)
    if generic:
        V[:] = 0.0
    for alpha in range(1, bs.r + 1):
        off = bs.pos(1, alpha)
        m = bs.size(alpha)
        for i in range(m):
            for j in range(i + 1):
                V[off + i, off + j] = X[off + i - j]
    return V


def unit_vector(bs: BlockStructure) -> np.ndarray:
    e = np.zeros(bs.n)
    for alpha in range(1, bs.r + 1):
        e[bs.pos(1, alpha)] = 1.0
    return e


def euler_field(u: Sequence) -> list:
    return list(u)


def c_symmetry_residual(bs: BlockStructure, M: np.ndarray) -> float:
    """Max of ``|c^s_{ji} M_{sk} - c^s_{ki} M_{sj}|`` over all ``i, j, k``."""
    c = bs.structure_constants
    T = np.einsum("sji,sk->ijk", c, np.asarray(M, dtype=float))
    return float(np.max(np.abs(T - np.swapaxes(T, 1, 2)))) if bs.n else 0.0


def hankel_generators(bs: BlockStructure, M: np.ndarray) -> np.ndarray:
    """``theta_s = M_{sj} e^j``; recovers the generators of a Hankel matrix."""
    return np.asarray(M, dtype=float) @ unit_vector(bs)
