"""Polynomials in ``xi`` with matrix or vector coefficients.

This is the slow, literal route to ``eta``: build every encoding polynomial,
multiply them out coefficient by coefficient and read off the result. It is
only meant for small exact problems, where it serves as an oracle for the
worker recursion and the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import Splits
from .linalg import backend_of, is_exact, scalar, zeros

MAX_TOP = 32  # largest m^(n/2) the expansion will attempt


class SymbolicLimitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MatPoly:
    """``sum_i coeffs[i] xi^i``; coefficients share one shape (matrix or vector)."""

    coeffs: tuple

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("a polynomial needs at least one coefficient")
        shape = self.coeffs[0].shape
        if any(c.shape != shape for c in self.coeffs):
            raise ValueError("coefficient shapes differ")

    @classmethod
    def constant(cls, M: np.ndarray) -> "MatPoly":
        return cls((M,))

    @classmethod
    def from_blocks(cls, blocks, order: str = "ascending") -> "MatPoly":
        bs = tuple(blocks)
        return cls(bs if order == "ascending" else bs[::-1])

    @property
    def shape(self):
        return self.coeffs[0].shape

    @property
    def backend(self) -> str:
        return backend_of(self.coeffs[0])

    @property
    def degree(self) -> int:
        """Index of the last nonzero coefficient; -1 for the zero polynomial."""
        for i in range(len(self.coeffs) - 1, -1, -1):
            if np.any(self.coeffs[i] != 0):
                return i
        return -1

    def coeff(self, i: int) -> np.ndarray:
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return zeros(self.shape, self.backend)

    def __add__(self, other: "MatPoly") -> "MatPoly":
        if other.shape != self.shape:
            raise ValueError(f"cannot add polynomials of shape {self.shape} and {other.shape}")
        size = max(len(self.coeffs), len(other.coeffs))
        return MatPoly(tuple(self.coeff(i) + other.coeff(i) for i in range(size)))

    def __mul__(self, other) -> "MatPoly":
        """Product with another polynomial or a constant matrix/vector."""
        if isinstance(other, np.ndarray):
            other = MatPoly.constant(other)
        first = self.coeffs[0].dot(other.coeffs[0])
        out = [zeros(first.shape, self.backend) for _ in range(len(self.coeffs) + len(other.coeffs) - 1)]
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a.dot(b)
        return MatPoly(tuple(out))

    def compose_power(self, k: int) -> "MatPoly":
        """Substitute ``xi -> xi^k``."""
        if k < 1:
            raise ValueError("power must be >= 1")
        out = [zeros(self.shape, self.backend) for _ in range((len(self.coeffs) - 1) * k + 1)]
        for i, c in enumerate(self.coeffs):
            out[i * k] = c
        return MatPoly(tuple(out))

    def shift(self, k: int) -> "MatPoly":
        """Multiply by ``xi^k``."""
        pad = tuple(zeros(self.shape, self.backend) for _ in range(k))
        return MatPoly(pad + self.coeffs)

    def evaluate(self, xi) -> np.ndarray:
        acc = self.coeffs[-1].copy()
        for c in self.coeffs[-2::-1]:
            acc = acc * xi + c
        return acc


@dataclass(frozen=True, eq=False)
class EncodingPolys:
    pA1: MatPoly
    pA2: MatPoly
    pQ2: MatPoly
    pI: MatPoly
    m: int

    @classmethod
    def of(cls, A: np.ndarray, Q: np.ndarray, m: int) -> "EncodingPolys":
        s = Splits.of(A, Q, m)
        N = A.shape[0]
        size = N // m
        backend = backend_of(A)
        one = scalar(1, backend)
        ident = []
        for j in range(m):
            block = zeros((N, size), backend)
            for k in range(size):
                block[j * size + k, k] = one
            ident.append(block)
        return cls(
            pA1=MatPoly.from_blocks(s.A1.blocks, "ascending"),
            pA2=MatPoly.from_blocks(s.A2.blocks, "descending"),
            pQ2=MatPoly.from_blocks(s.Q2.blocks, "descending"),
            pI=MatPoly.from_blocks(ident, "ascending"),
            m=m,
        )

    def pC(self, level: int = 0) -> MatPoly:
        """``pA1 pA2`` at ``xi^(m^level)``."""
        return (self.pA1 * self.pA2).compose_power(self.m ** level)

    def pD(self) -> MatPoly:
        return self.pA1 * self.pQ2

    def at(self, poly: MatPoly, level: int) -> MatPoly:
        return poly.compose_power(self.m ** level)


def _check_top(m: int, half: int):
    if m ** half > MAX_TOP:
        raise SymbolicLimitError(f"m^{half} = {m ** half} exceeds the symbolic cap {MAX_TOP}")


def telescoped(enc: EncodingPolys, top: int) -> MatPoly:
    """``pC(xi^(m^(top-1))) ... pC(xi^m) pD(xi)``; just ``pD`` when ``top < 2``."""
    prod = enc.pD()
    for i in range(2, top + 1):
        prod = enc.pC(i - 1) * prod
    return prod


def symbolic_P(enc: EncodingPolys, l: int) -> MatPoly:
    """``P^(l,m)`` for ``l >= 3``.

    Even ``l`` is the telescoped product up to ``l/2``. Odd ``l`` takes the
    product up to ``(l-1)/2`` and puts ``pI pA2`` in front, both at
    ``xi^(m^((l-1)/2))``.
    """
    if l < 3:
        raise ValueError("P is defined for l >= 3")
    _check_top(enc.m, (l + 1) // 2)
    if l % 2 == 0:
        return telescoped(enc, l // 2)
    lvl = l // 2
    return enc.at(enc.pI, lvl) * (enc.at(enc.pA2, lvl) * telescoped(enc, lvl))


def paired(enc: EncodingPolys, l: int) -> MatPoly:
    """``P^(l,m) + P^(l-1,m)`` for even ``l >= 4``."""
    if l % 2 or l < 4:
        raise ValueError("pairs are formed for even l >= 4")
    return symbolic_P(enc, l) + symbolic_P(enc, l - 1)


def shifted_pair(enc: EncodingPolys, n: int, t: int) -> MatPoly:
    """``xi^(m^(n/2) - m^(t/2)) (P^(t,m) + P^(t-1,m))`` for even ``4 <= t <= n``."""
    if n % 2 or t % 2 or not 4 <= t <= n:
        raise ValueError("need even t and n with 4 <= t <= n")
    _check_top(enc.m, n // 2)
    return paired(enc, t).shift(enc.m ** (n // 2) - enc.m ** (t // 2))


def symbolic_eta(A, Q, x0, y, m: int, n: int) -> MatPoly:
    """Expand ``eta`` into its full coefficient list (exact backend only).

    Built term by term: the ``x0`` product, one shifted ``P`` per ``i = 5..n``,
    the ``m^2`` term for ``n >= 4`` and the leading ``pD + pI pQ2`` term.
    """
    if n % 2 or n < 2:
        raise ValueError("n must be even and >= 2")
    if not is_exact(A):
        raise TypeError("symbolic expansion needs the exact backend")
    _check_top(m, n // 2)
    enc = EncodingPolys.of(A, Q, m)
    top = m ** (n // 2)

    v = MatPoly.constant(x0)
    for i in range(1, n // 2 + 1):
        v = enc.pC(i - 1) * v
    out = v
    for i in range(5, n + 1):
        out = out + (symbolic_P(enc, i) * y).shift(top - m ** ((i + 1) // 2))
    if n >= 4:
        inner = enc.pC(1) + enc.at(enc.pI, 1) * enc.at(enc.pA2, 1)
        out = out + (inner * (enc.pD() * y)).shift(top - m ** 2)
    first = enc.pD() + enc.pI * enc.pQ2
    out = out + (first * y).shift(top - m)
    return out

