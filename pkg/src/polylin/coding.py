"""Polynomial encoding of ``n`` iterations into one worker evaluation.

``A`` is cut into column blocks ``A1_j`` and row blocks ``A2_j``; ``Q`` and the
identity into row blocks. The encodings are::

    pA1(x) = sum_j A1_j x^j            (N x N/m)
    pA2(x) = sum_j A2_j x^(m-1-j)      (N/m x N)
    pQ2(x) = sum_j Q2_j x^(m-1-j)      (N/m x N)
    pI(x)  = sum_j I_j^T x^j           (N x N/m)

so the ``x^(m-1)`` coefficient of ``pA1 pA2`` is ``A^2``. A worker holding the
evaluations at ``xi`` and its towers ``xi^(m^k)`` produces ``eta(xi)``, a
vector polynomial of degree ``2 m^(n/2) - 2`` whose ``x^(m^(n/2) - 1)``
coefficient is ``x(n)``. Any ``K = 2 m^(n/2) - 1`` evaluations recover it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from .linalg import (
    EXACT,
    DimensionError,
    OpCounter,
    backend_of,
    mat_vec,
    scalar,
    scale,
    split_horizontal,
    split_vertical,
    zeros,
)

Order = Literal["ascending", "descending"]


class DecodeError(ValueError):
    pass


def recovery_threshold(m: int, n: int) -> int:
    return 2 * m ** (n // 2) - 1


def split_for_threshold(K: int, n: int) -> int | None:
    """The ``m`` with ``2 m^(n/2) - 1 = K``, or ``None`` if there is none."""
    half, rem = divmod(K + 1, 2)
    if rem or half < 1 or n < 2 or n % 2:
        return None
    guess = round(half ** (2 / n))
    for m in (guess - 1, guess, guess + 1):
        if m >= 1 and m ** (n // 2) == half:
            return m
    return None


POINT_SCHEMES = ("integers", "chebyshev", "near-one")


def default_eval_points(P: int, backend: str, scheme: str | None = None) -> tuple:
    """Distinct nonzero evaluation points for ``P`` workers.

    ``integers``  1, 2, ..., P (default for the exact backend)
    ``chebyshev`` Chebyshev nodes on (-1, 1), zero excluded (default for floats)
    ``near-one``  1 + j/(4P), j = 1..P

    Float decoding loses roughly ``sum_j |c_j|`` ulps, where ``c`` are the
    interpolation weights. Clustered points such as ``near-one`` push that sum
    above 1e8 already at K = 7; Chebyshev nodes keep it small.
    """
    if scheme is None:
        scheme = "integers" if backend == EXACT else "chebyshev"
    if scheme == "integers":
        pts = [Fraction(j) for j in range(1, P + 1)]
    elif scheme == "near-one":
        pts = [1 + Fraction(j, 4 * P) for j in range(1, P + 1)]
    elif scheme == "chebyshev":
        Pe = P + P % 2
        pts = [math.cos(math.pi * (2 * j + 1) / (2 * Pe)) for j in range(P)]
    else:
        raise ValueError(f"unknown point scheme {scheme!r}; expected one of {POINT_SCHEMES}")
    return tuple(scalar(x, backend) for x in pts)


@dataclass(frozen=True)
class CodingParams:
    m: int
    n: int
    P: int
    eval_points: tuple

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"split factor m must be >= 1, got {self.m}")
        if self.n < 2 or self.n % 2:
            raise ValueError(f"iteration count n must be even and >= 2, got {self.n}")
        if self.P < self.K:
            raise ValueError(f"need P >= K = {self.K} workers, got P = {self.P}")
        if len(self.eval_points) != self.P:
            raise ValueError(f"need {self.P} evaluation points, got {len(self.eval_points)}")
        if len(set(self.eval_points)) != self.P:
            raise ValueError("evaluation points must be distinct")
        if any(x == 0 for x in self.eval_points):
            raise ValueError("evaluation points must be nonzero")

    @classmethod
    def create(cls, m: int, n: int, P: int | None = None, backend: str = EXACT, eval_points=None,
               scheme: str | None = None):
        if P is None:
            P = recovery_threshold(m, n)
        if eval_points is None:
            eval_points = default_eval_points(P, backend, scheme)
        return cls(m, n, P, tuple(eval_points))

    @property
    def K(self) -> int:
        return recovery_threshold(self.m, self.n)

    @property
    def levels(self) -> int:
        return self.n // 2

    @property
    def target_power(self) -> int:
        return self.m ** (self.n // 2) - 1


def eval_split_poly(blocks, xi, order: Order = "ascending"):
    """Horner evaluation of ``sum_j block_j xi^j`` (ascending) or
    ``sum_j block_j xi^(m-1-j)`` (descending)."""
    bs = blocks.blocks if hasattr(blocks, "blocks") else tuple(blocks)
    seq = bs[::-1] if order == "ascending" else bs
    acc = seq[0].copy()
    for b in seq[1:]:
        acc = acc * xi + b
    return acc


def identity_scales(xi, m: int) -> tuple:
    """The ``m`` scalars ``xi^0 .. xi^(m-1)`` that stand in for ``pI(xi)``."""
    out, p = [], xi ** 0
    for _ in range(m):
        out.append(p)
        p = p * xi
    return tuple(out)


def apply_identity_poly(scales: Sequence, w: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """``pI(xi) w`` without forming ``pI``: block ``j`` of the result is ``scales[j] * w``."""
    if counter is not None:
        counter.add(len(scales) * w.size)
    return np.concatenate([w * c for c in scales])


def dense_identity_poly(scales: Sequence, size: int, backend: str) -> np.ndarray:
    """Dense ``N x N/m`` matrix of ``pI(xi)``, for cross-checks only."""
    m = len(scales)
    out = zeros((m * size, size), backend)
    for j, c in enumerate(scales):
        for k in range(size):
            out[j * size + k, k] = c
    return out


@dataclass(frozen=True)
class Splits:
    A1: object  # column blocks of A
    A2: object  # row blocks of A
    Q2: object  # row blocks of Q

    @classmethod
    def of(cls, A: np.ndarray, Q: np.ndarray, m: int) -> "Splits":
        N = A.shape[0]
        if A.shape != (N, N) or Q.shape != (N, N):
            raise DimensionError("A and Q must be square and the same size")
        if N % m:
            raise DimensionError(f"m = {m} does not divide N = {N}; zero-pad first")
        return cls(split_vertical(A, m), split_horizontal(A, m), split_horizontal(Q, m))


@dataclass(frozen=True, eq=False)
class ShardBundle:
    """Everything one worker stores, evaluated at its own point ``xi``.

    Level ``k`` (0-based) holds ``pA1`` and ``pA2`` at ``xi^(m^k)`` plus the
    ``m`` scale factors of ``pI`` there.
    """

    worker_index: int
    xi: object
    A1: tuple
    A2: tuple
    scale_I: tuple
    Q2: np.ndarray

    @property
    def levels(self) -> int:
        return len(self.A1)

    @property
    def m(self) -> int:
        return len(self.scale_I[0])

    @property
    def N(self) -> int:
        return self.Q2.shape[1]

    @property
    def backend(self) -> str:
        return backend_of(self.Q2)

    @property
    def storage_words(self) -> int:
        mats = sum(a.size for a in self.A1) + sum(a.size for a in self.A2) + self.Q2.size
        return mats + sum(len(s) for s in self.scale_I)

    def to_bytes(self) -> bytes:
        return encode_shard(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ShardBundle":
        return decode_shard(data)


def towers(xi, m: int, levels: int) -> list:
    """``xi^(m^0), xi^(m^1), ...`` for each level."""
    out, t = [], xi
    for _ in range(levels):
        out.append(t)
        t = t ** m
    return out


def make_shard(A, Q, params: CodingParams, worker_index: int, splits: Splits | None = None) -> ShardBundle:
    if splits is None:
        splits = Splits.of(A, Q, params.m)
    xi = params.eval_points[worker_index]
    ts = towers(xi, params.m, params.levels)
    return ShardBundle(
        worker_index=worker_index,
        xi=xi,
        A1=tuple(eval_split_poly(splits.A1, t, "ascending") for t in ts),
        A2=tuple(eval_split_poly(splits.A2, t, "descending") for t in ts),
        scale_I=tuple(identity_scales(t, params.m) for t in ts),
        Q2=eval_split_poly(splits.Q2, xi, "descending"),
    )


def make_shards(A, Q, params: CodingParams) -> list:
    splits = Splits.of(A, Q, params.m)
    return [make_shard(A, Q, params, w, splits) for w in range(params.P)]


@dataclass(frozen=True, eq=False)
class EtaEval:
    xi: object
    value: np.ndarray


def _check_shard(shard: ShardBundle, n, m):
    m = shard.m if m is None else m
    n = 2 * shard.levels if n is None else n
    if n % 2 or n < 2:
        raise ValueError("n must be even and >= 2")
    if n // 2 != shard.levels or m != shard.m:
        raise ValueError(f"shard was built for n={2 * shard.levels}, m={shard.m}")
    return n, m


def worker_r(shard: ShardBundle, x0, n: int | None = None, m: int | None = None,
             counter: OpCounter | None = None) -> np.ndarray:
    """The ``x0`` part of ``eta``: alternating ``pA2``/``pA1`` products, ``n`` of them."""
    n, m = _check_shard(shard, n, m)
    r = x0
    for i in range(1, n + 1):
        lvl = (i + 1) // 2 - 1
        r = mat_vec(shard.A2[lvl] if i % 2 else shard.A1[lvl], r, counter)
    return r


def worker_s(shard: ShardBundle, y, n: int | None = None, m: int | None = None,
             counter: OpCounter | None = None) -> np.ndarray:
    """The ``y`` part of ``eta``.

    ``w`` follows ``pQ2 y`` through the same alternating products; every even
    step adds the shifted ``w(i) + pI w(i-1)`` to the running sum.
    """
    n, m = _check_shard(shard, n, m)
    xi = shard.xi
    top = m ** (n // 2)

    def shifted(k, v):
        return v if k == 0 else scale(xi ** k, v, counter)

    w_odd = mat_vec(shard.Q2, y, counter)
    w = mat_vec(shard.A1[0], w_odd, counter)
    s = shifted(top - m, w + apply_identity_poly(shard.scale_I[0], w_odd, counter))
    for lvl in range(1, n // 2):
        w_odd = mat_vec(shard.A2[lvl], w, counter)
        w = mat_vec(shard.A1[lvl], w_odd, counter)
        part = w + apply_identity_poly(shard.scale_I[lvl], w_odd, counter)
        s = s + shifted(top - m ** (lvl + 1), part)
    return s


def worker_eta(shard: ShardBundle, x0, y, n: int | None = None, m: int | None = None,
               counter: OpCounter | None = None) -> EtaEval:
    """``eta(shard.xi)`` as ``worker_r(x0) + worker_s(y)``.

    The two parts are independent, so a worker that keeps ``y`` from setup can
    compute ``worker_s`` once ahead of time.
    """
    r = worker_r(shard, x0, n, m, counter)
    return EtaEval(shard.xi, r + worker_s(shard, y, n, m, counter))


class _DenseEvals:
    """Dense evaluations of every encoding polynomial at one ``xi``."""

    def __init__(self, splits: Splits, m: int, xi, backend: str):
        self.m, self.xi, self.backend = m, xi, backend
        self.size = splits.A2.blocks[0].shape[0]
        self._splits = splits
        self._cache = {}

    def _get(self, key, t):
        k = (key, t)
        if k not in self._cache:
            s = self._splits
            if key == "A1":
                v = eval_split_poly(s.A1, t, "ascending")
            elif key == "A2":
                v = eval_split_poly(s.A2, t, "descending")
            elif key == "Q2":
                v = eval_split_poly(s.Q2, t, "descending")
            else:
                v = dense_identity_poly(identity_scales(t, self.m), self.size, self.backend)
            self._cache[k] = v
        return self._cache[k]

    def pA1(self, t):
        return self._get("A1", t)

    def pA2(self, t):
        return self._get("A2", t)

    def pQ2(self, t):
        return self._get("Q2", t)

    def pI(self, t):
        return self._get("I", t)

    def pC(self, t):
        return self.pA1(t).dot(self.pA2(t))

    def pD(self, t):
        return self.pA1(t).dot(self.pQ2(t))

    def tower(self, k):
        return self.xi ** (self.m ** k)

    def P(self, l: int):
        """Dense ``P^(l,m)(xi)``.

        Odd ``l`` carries ``pI pA2`` at the top tower so the product is
        ``N x N``; a product whose start index is below 2 is empty.
        """
        prod = self.pD(self.xi)
        top = l // 2 if l % 2 == 0 else (l - 1) // 2
        for i in range(2, top + 1):
            prod = self.pC(self.tower(i - 1)).dot(prod)
        if l % 2:
            t = self.tower(l // 2)
            prod = self.pI(t).dot(self.pA2(t).dot(prod))
        return prod


def eta_direct(A, Q, x0, y, m: int, n: int, xi) -> EtaEval:
    """Evaluate ``eta(xi)`` term by term from its closed form (no recursion)."""
    if n % 2 or n < 2:
        raise ValueError("n must be even and >= 2")
    backend = backend_of(A)
    ev = _DenseEvals(Splits.of(A, Q, m), m, xi, backend)
    top = m ** (n // 2)

    v = x0
    for i in range(1, n // 2 + 1):
        v = ev.pC(ev.tower(i - 1)).dot(v)
    out = v

    for i in range(5, n + 1):
        out = out + xi ** (top - m ** ((i + 1) // 2)) * ev.P(i).dot(y)
    if n >= 4:
        t = ev.tower(1)
        inner = ev.pC(t) + ev.pI(t).dot(ev.pA2(t))
        out = out + xi ** (top - m ** 2) * inner.dot(ev.pD(xi).dot(y))
    first = ev.pD(xi) + ev.pI(xi).dot(ev.pQ2(xi))
    out = out + xi ** (top - m) * first.dot(y)
    return EtaEval(xi, out)


@lru_cache(maxsize=4096)
def _exact_weights(xis: tuple, target: int) -> tuple:
    K = len(xis)
    # ascending coefficients of prod_k (x - xi_k)
    full = [Fraction(1)]
    for a in xis:
        nxt = [Fraction(0)] * (len(full) + 1)
        for i, c in enumerate(full):
            nxt[i + 1] += c
            nxt[i] -= a * c
        full = nxt
    out = []
    for j, a in enumerate(xis):
        q = [Fraction(0)] * K
        q[K - 1] = full[K]
        for i in range(K - 1, 0, -1):
            q[i - 1] = full[i] + a * q[i]
        denom = Fraction(1)
        for k, b in enumerate(xis):
            if k != j:
                denom *= a - b
        out.append(q[target] / denom)
    return tuple(out)


def lagrange_coefficient_weights(xis: Sequence, target_power: int) -> tuple:
    """Weights ``c`` with ``sum_j c_j f(xi_j) = [x^target_power] f`` for ``deg f < K``.

    Weights are always computed in exact arithmetic; float points are converted
    exactly (every binary64 is a rational) and the weights rounded once at the end.
    """
    K = len(xis)
    if K == 0:
        raise DecodeError("need at least one evaluation point")
    if len(set(xis)) != K:
        raise DecodeError("evaluation points must be distinct")
    if not 0 <= target_power < K:
        raise DecodeError(f"target power {target_power} out of range for {K} points")
    exact = all(isinstance(x, (Fraction, int)) for x in xis)
    w = _exact_weights(tuple(Fraction(x) for x in xis), target_power)
    return w if exact else tuple(float(c) for c in w)


def decode(evals: Sequence[EtaEval], m: int, n: int, original_N: int | None = None,
           counter: OpCounter | None = None) -> np.ndarray:
    """Recover ``x(n)`` from exactly ``K`` worker evaluations."""
    K = recovery_threshold(m, n)
    if len(evals) != K:
        raise DecodeError(f"decode needs exactly K = {K} evaluations, got {len(evals)}")
    xis = [e.xi for e in evals]
    if len(set(xis)) != K:
        raise DecodeError("duplicate evaluation points")
    weights = lagrange_coefficient_weights(xis, m ** (n // 2) - 1)
    if counter is not None:
        counter.add(K * K + K * evals[0].value.size)
    out = evals[0].value * weights[0]
    for c, e in zip(weights[1:], evals[1:]):
        out = out + e.value * c
    return out if original_N is None else out[:original_N]


# -- ShardBundle wire format ------------------------------------------------
#
#   magic "PLSB" | u8 version | u8 backend (0 float, 1 exact)
#   u32 worker | u32 m | u32 levels | scalar xi
#   levels x (matrix A1, matrix A2, vector scale_I) | matrix Q2
#
# matrix = u32 rows, u32 cols, rows*cols scalars (row-major); vector = u32 len,
# scalars. Float scalar = f64 LE. Exact scalar = numerator then denominator, each
# u32 byte length + big-endian two's complement bytes. All integers are LE.

_MAGIC = b"PLSB"
_VERSION = 1


def _int_bytes(v: int) -> bytes:
    raw = v.to_bytes((v.bit_length() + 8) // 8 or 1, "big", signed=True)
    return struct.pack("<I", len(raw)) + raw


class _Writer:
    def __init__(self, exact: bool):
        self.exact = exact
        self.parts = []

    def u32(self, v):
        self.parts.append(struct.pack("<I", v))

    def scalar(self, v):
        if self.exact:
            v = Fraction(v)
            self.parts.append(_int_bytes(v.numerator) + _int_bytes(v.denominator))
        else:
            self.parts.append(struct.pack("<d", float(v)))

    def matrix(self, M):
        self.u32(M.shape[0])
        self.u32(M.shape[1])
        for v in M.reshape(-1):
            self.scalar(v)

    def vector(self, v):
        self.u32(len(v))
        for e in v:
            self.scalar(e)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0
        self.exact = False

    def take(self, k):
        if self.pos + k > len(self.data):
            raise ValueError("truncated shard payload")
        out = self.data[self.pos:self.pos + k]
        self.pos += k
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def _int(self):
        return int.from_bytes(self.take(self.u32()), "big", signed=True)

    def scalar(self):
        if self.exact:
            num = self._int()
            return Fraction(num, self._int())
        return struct.unpack("<d", self.take(8))[0]

    def matrix(self):
        r, c = self.u32(), self.u32()
        vals = [self.scalar() for _ in range(r * c)]
        if self.exact:
            out = np.empty(r * c, dtype=object)
            out[:] = vals
            return out.reshape(r, c)
        return np.array(vals, dtype=np.float64).reshape(r, c)

    def vector(self):
        return tuple(self.scalar() for _ in range(self.u32()))


def encode_shard(shard: ShardBundle) -> bytes:
    exact = shard.backend == EXACT
    w = _Writer(exact)
    w.parts.append(_MAGIC + bytes([_VERSION, 1 if exact else 0]))
    w.u32(shard.worker_index)
    w.u32(shard.m)
    w.u32(shard.levels)
    w.scalar(shard.xi)
    for a1, a2, sc in zip(shard.A1, shard.A2, shard.scale_I):
        w.matrix(a1)
        w.matrix(a2)
        w.vector(sc)
    w.matrix(shard.Q2)
    return b"".join(w.parts)


def decode_shard(data: bytes) -> ShardBundle:
    r = _Reader(data)
    if r.take(4) != _MAGIC:
        raise ValueError("not a shard bundle")
    version, tag = r.take(2)
    if version != _VERSION:
        raise ValueError(f"unsupported shard version {version}")
    if tag not in (0, 1):
        raise ValueError(f"unknown backend tag {tag}")
    r.exact = tag == 1
    worker, m, levels = r.u32(), r.u32(), r.u32()
    xi = r.scalar()
    A1, A2, S = [], [], []
    for _ in range(levels):
        A1.append(r.matrix())
        A2.append(r.matrix())
        S.append(r.vector())
    Q2 = r.matrix()
    if r.pos != len(data):
        raise ValueError("trailing bytes after shard payload")
    if any(len(s) != m for s in S):
        raise ValueError("scale vector length does not match m")
    return ShardBundle(worker, xi, tuple(A1), tuple(A2), tuple(S), Q2)

