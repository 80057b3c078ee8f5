"""Centralized reference solver for ``x <- A x + Q y``.

Everything distributed in this package is checked against :func:`iterate`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import (
    DimensionError,
    backend_of,
    eye,
    is_exact,
    mat_vec,
    norm2,
    scalar,
    solve,
    spectral_radius_estimate,
    zeros,
)


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class IterationSystem:
    """The recursion ``x(k+1) = A x(k) + Q y`` started at ``x0`` and run ``n`` times.

    Float systems whose estimated spectral radius is >= 1 raise a
    :class:`ConvergenceWarning`; they are still valid to iterate.
    """

    A: np.ndarray
    Q: np.ndarray
    y: np.ndarray
    x0: np.ndarray
    n: int

    def __post_init__(self):
        N = self.A.shape[0]
        if self.A.shape != (N, N):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.Q.shape != (N, N):
            raise DimensionError(f"Q must be {N}x{N}, got {self.Q.shape}")
        if self.y.shape != (N,) or self.x0.shape != (N,):
            raise DimensionError(f"y and x0 must have length {N}")
        if self.n < 0:
            raise ValueError("iteration count must be non-negative")
        if backend_of(self.A) != backend_of(self.Q):
            raise TypeError("A and Q use different scalar backends")
        if not is_exact(self.A) and N:
            rho = spectral_radius_estimate(self.A)
            if rho >= 1.0:
                warnings.warn(f"estimated spectral radius {rho:.4g} >= 1; iteration will not converge",
                              ConvergenceWarning, stacklevel=3)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def backend(self) -> str:
        return backend_of(self.A)

    def with_n(self, n: int) -> "IterationSystem":
        return IterationSystem(self.A, self.Q, self.y, self.x0, n)


@dataclass(frozen=True)
class ErrorBoundInputs:
    sigma1: float
    N: int
    max_alpha: float
    epsilon: float

    def __post_init__(self):
        if not self.sigma1 > 0:
            raise ValueError("sigma1 must be positive")
        if self.sigma1 >= 1:
            raise ValueError(f"sigma1 must be < 1 for the iteration to converge, got {self.sigma1}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_alpha < 0:
            raise ValueError("max_alpha must be non-negative")


def jacobi_cast(M: np.ndarray, y: np.ndarray | None = None):
    """Jacobi splitting ``M = D + L``: returns ``A = -D^-1 L`` and ``Q = D^-1``.

    ``y`` is accepted for symmetry with the other casts and is not modified.
    """
    N = M.shape[0]
    if M.shape != (N, N):
        raise DimensionError("Jacobi needs a square matrix")
    backend = backend_of(M)
    d = [M[i, i] for i in range(N)]
    if any(v == 0 for v in d):
        raise ValueError("Jacobi cast needs a nonzero diagonal")
    one = scalar(1, backend)
    Q = zeros((N, N), backend)
    A = zeros((N, N), backend)
    for i in range(N):
        Q[i, i] = one / d[i]
        for j in range(N):
            if i != j:
                A[i, j] = -M[i, j] / d[i]
    return A, Q


def gd_cast(M: np.ndarray, delta, lam=0):
    """Gradient-descent cast: ``A = (1-lam) I - delta M^T M`` and ``Q = delta M^T``.

    ``M`` is ``L x N``. With ``L < N`` the ``N x L`` matrix ``Q`` is padded with
    zero columns so it is square; pad ``y`` with zeros to length ``N`` to match.
    """
    L, N = M.shape
    if L > N:
        raise DimensionError(f"gd_cast supports L <= N only, got {L}x{N}")
    if not delta > 0:
        raise ValueError("step size delta must be positive")
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    backend = backend_of(M)
    delta = scalar(delta, backend)
    lam = scalar(lam, backend)
    MT = M.T
    A = (scalar(1, backend) - lam) * eye(N, backend) - delta * MT.dot(M)
    Q = zeros((N, N), backend)
    Q[:, :L] = delta * MT
    return A, Q


def iterate(sys: IterationSystem, counter=None) -> np.ndarray:
    x = sys.x0.copy()
    Qy = mat_vec(sys.Q, sys.y, counter) if sys.n else None
    for _ in range(sys.n):
        x = mat_vec(sys.A, x, counter) + Qy
    return x


def matrix_power(A: np.ndarray, k: int) -> np.ndarray:
    out = eye(A.shape[0], backend_of(A))
    for _ in range(k):
        out = out.dot(A)
    return out


def closed_form(sys: IterationSystem) -> np.ndarray:
    """``A^n x0 + (A^(n-1) + ... + I) Q y`` built from explicit matrix powers."""
    A = sys.A
    S = zeros(A.shape, sys.backend)
    for k in range(sys.n):
        S = S + matrix_power(A, k)
    return matrix_power(A, sys.n).dot(sys.x0) + S.dot(sys.Q.dot(sys.y))


def fixed_point(sys: IterationSystem) -> np.ndarray:
    """Solve ``(I - A) x* = Q y``."""
    return solve(eye(sys.N, sys.backend) - sys.A, sys.Q.dot(sys.y))


def error_norm(sys: IterationSystem, x_n: np.ndarray) -> float:
    return norm2(x_n - fixed_point(sys))


def required_iterations(b: ErrorBoundInputs):
    """Iterations sufficient for ``||e(n)|| <= epsilon``.

    Returns ``(bound, n_even)``: the real-valued bound
    ``log(N max_alpha / epsilon) / log(1 / sigma1)`` and the smallest even
    integer >= max(bound, 2).
    """
    if b.max_alpha == 0:
        bound = 0.0
    else:
        bound = math.log(b.N * b.max_alpha / b.epsilon) / math.log(1.0 / b.sigma1)
    n = max(math.ceil(bound), 2)
    if n % 2:
        n += 1
    return bound, n


def eigen_bound(sigma1: float, N: int, max_alpha: float, n: int) -> float:
    """Right-hand side ``N * sigma1**n * max_alpha`` of the error-decay bound."""
    return N * sigma1 ** n * max_alpha


def exact_to_float(v: np.ndarray) -> np.ndarray:
    return np.array([float(e) for e in v.reshape(-1)], dtype=np.float64).reshape(v.shape)

