"""Dense linear algebra over an exact-rational or binary64 scalar field.

Matrices and vectors are plain numpy arrays. The exact backend stores
:class:`fractions.Fraction` entries in ``dtype=object`` arrays, the float
backend uses ``float64``. Every routine here dispatches on the dtype, so the
same code path serves both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

EXACT = "exact"
FLOAT = "float"

Axis = Literal["horizontal", "vertical"]


class DimensionError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


class OpCounter:
    """Scalar-multiply tally for one simulated node.

    One counter is handed to each worker; nothing is shared between them.
    """

    def __init__(self) -> None:
        self.mults = 0

    def add(self, k: int) -> None:
        self.mults += int(k)

    def __repr__(self) -> str:
        return f"OpCounter(mults={self.mults})"


def backend_of(a: np.ndarray) -> str:
    return EXACT if a.dtype == object else FLOAT


def is_exact(a: np.ndarray) -> bool:
    return a.dtype == object


def to_backend(a, backend: str) -> np.ndarray:
    """Convert nested sequences/arrays into an array of the given backend."""
    arr = np.asarray(a, dtype=object if backend == EXACT else None)
    if backend == EXACT:
        out = np.empty(arr.shape, dtype=object)
        flat = out.reshape(-1)
        for i, v in enumerate(arr.reshape(-1)):
            flat[i] = Fraction(v)
        return out
    if backend == FLOAT:
        return np.array(arr, dtype=np.float64)
    raise ValueError(f"unknown backend {backend!r}")


def scalar(v, backend: str):
    return Fraction(v) if backend == EXACT else float(v)


def zeros(shape, backend: str) -> np.ndarray:
    if backend == EXACT:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape, dtype=np.float64)


def eye(n: int, backend: str) -> np.ndarray:
    out = zeros((n, n), backend)
    for i in range(n):
        out[i, i] = scalar(1, backend)
    return out


def mat_vec(A: np.ndarray, x: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Dense product ``A @ x``; charges ``rows*cols`` multiplies to ``counter``."""
    if A.ndim != 2 or x.ndim != 1:
        raise DimensionError(f"mat_vec expects a matrix and a vector, got {A.shape} and {x.shape}")
    if A.shape[1] != x.shape[0]:
        raise DimensionError(f"cannot multiply {A.shape[0]}x{A.shape[1]} matrix by vector of length {x.shape[0]}")
    if counter is not None:
        counter.add(A.shape[0] * A.shape[1])
    if A.shape[1] == 0:
        return zeros(A.shape[0], backend_of(A))
    return A.dot(x)


def scale(c, v: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    if counter is not None:
        counter.add(v.size)
    return v * c


def norm2(v: np.ndarray) -> float:
    if is_exact(v):
        return math.sqrt(float(sum((e * e for e in v), Fraction(0))))
    return float(np.linalg.norm(v))


@dataclass(frozen=True)
class BlockSplit:
    """Equal blocks of a matrix along one axis.

    ``horizontal`` cuts rows (blocks are stacked on top of each other),
    ``vertical`` cuts columns (blocks sit side by side).
    """

    m: int
    blocks: tuple
    axis: Axis

    def unsplit(self) -> np.ndarray:
        if self.axis == "horizontal":
            return np.vstack(self.blocks)
        return np.hstack(self.blocks)


def _split(M: np.ndarray, m: int, axis: Axis) -> BlockSplit:
    if m < 1:
        raise ValueError(f"block count must be >= 1, got {m}")
    dim = M.shape[0] if axis == "horizontal" else M.shape[1]
    if dim % m:
        raise DimensionError(f"{m} does not divide dimension {dim}; zero-pad first")
    size = dim // m
    if axis == "horizontal":
        blocks = tuple(M[j * size:(j + 1) * size, :].copy() for j in range(m))
    else:
        blocks = tuple(M[:, j * size:(j + 1) * size].copy() for j in range(m))
    return BlockSplit(m, blocks, axis)


def split_horizontal(M: np.ndarray, m: int) -> BlockSplit:
    """Cut ``M`` into ``m`` row blocks; block ``j`` holds rows ``j*N/m .. (j+1)*N/m - 1``."""
    return _split(M, m, "horizontal")


def split_vertical(M: np.ndarray, m: int) -> BlockSplit:
    """Cut ``M`` into ``m`` column blocks."""
    return _split(M, m, "vertical")


def padded_size(N: int, m: int) -> int:
    return m * -(-N // m)


def zero_pad(A, Q, x0, y, m: int):
    """Extend ``A, Q, x0, y`` with zeros so their size is a multiple of ``m``.

    Returns ``(A, Q, x0, y, N)`` where ``N`` is the original size. The padded
    coordinates stay zero under the recursion, so truncating any padded iterate
    gives the unpadded one.
    """
    N = A.shape[0]
    if A.shape != (N, N) or Q.shape != (N, N):
        raise DimensionError("A and Q must be square and of equal size")
    Np = padded_size(N, m)
    if Np == N:
        return A, Q, x0, y, N
    backend = backend_of(A)
    pad = Np - N
    A2 = zeros((Np, Np), backend)
    A2[:N, :N] = A
    Q2 = zeros((Np, Np), backend)
    Q2[:N, :N] = Q
    x2 = np.concatenate([x0, zeros(pad, backend)])
    y2 = np.concatenate([y, zeros(pad, backend)])
    return A2, Q2, x2, y2, N


def solve(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``M x = b``; exact Gauss-Jordan for rationals, LAPACK for floats."""
    n = M.shape[0]
    if M.shape != (n, n) or b.shape[0] != n:
        raise DimensionError(f"solve needs a square system, got {M.shape} and {b.shape}")
    if not is_exact(M):
        try:
            return np.linalg.solve(M, b)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc
    aug = [list(M[i]) + [b[i]] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularMatrixError("matrix is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * c for a, c in zip(aug[r], aug[col])]
    out = np.empty(n, dtype=object)
    for i in range(n):
        out[i] = aug[i][n]
    return out


def spectral_radius_estimate(A: np.ndarray, iters: int = 200, seed=0) -> float:
    """Power-iteration estimate of the spectral radius of ``A``.

    The estimate is the geometric mean of the per-step growth factors over the
    second half of the run. That converges geometrically when one eigenvalue
    dominates and averages out the oscillation caused by a dominant complex
    pair, but it is only an estimate: no bound on its error is claimed.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape[0] != A.shape[1]:
        raise DimensionError("spectral radius needs a square matrix")
    if not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    logs = []
    for _ in range(max(iters, 2)):
        w = A @ v
        g = np.linalg.norm(w)
        if g == 0.0:
            return 0.0
        logs.append(math.log(g))
        v = w / g
    tail = logs[len(logs) // 2:]
    return math.exp(sum(tail) / len(tail))


def _format_scalar(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return repr(float(v))


def format_matrix(M: np.ndarray) -> str:
    """Serialize to the text format: ``rows cols`` then row-major values."""
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines += [" ".join(_format_scalar(v) for v in row) for row in M]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, backend: str | None = None) -> np.ndarray:
    """Parse the text format. Values written as ``p/q`` force the exact backend."""
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("matrix text must start with 'rows cols'")
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = tokens[2:]
    if len(vals) != rows * cols:
        raise ValueError(f"expected {rows * cols} values, found {len(vals)}")
    if backend is None:
        backend = EXACT if any("/" in t for t in vals) else FLOAT
    if backend == EXACT:
        data = [Fraction(t) for t in vals]
    else:
        data = [float(Fraction(t)) if "/" in t else float(t) for t in vals]
    return to_backend(np.array(data, dtype=object).reshape(rows, cols), backend)


def read_matrix(path, backend: str | None = None) -> np.ndarray:
    return parse_matrix(Path(path).read_text(), backend)


def write_matrix(path, M: np.ndarray) -> None:
    Path(path).write_text(format_matrix(M))


def as_vector(M: np.ndarray) -> np.ndarray:
    """Flatten an ``N x 1`` or ``1 x N`` matrix read from disk into a vector."""
    if M.ndim == 2 and 1 not in M.shape:
        raise DimensionError(f"expected a single row or column, got {M.shape}")
    return M.reshape(-1)


def stack_rows(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(list(parts))
