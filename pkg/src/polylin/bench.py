"""Problem generation, experiment grids and report output.

A config is a JSON object::

    {
      "problem":    {"N": 8, "target_rho": 0.5, "seed": 0, "cast": "raw"}
                    or {"A": "a.txt", "Q": "q.txt", "y": "y.txt", "x0": "x0.txt"},
      "backend":    "exact" | "float",
      "pad":        true,
      "strategies": [{"strategy": "polylin", "m": 2, "n": 4, "P": 10, "K": 7}, ...],
      "cluster":    {"beta1": 1, "beta2": 0.01, "compute_rate": 0,
                     "straggler": {"kind": "none"}, "seed": 0, "failed": []},
      "out": null, "format": "csv"
    }

Any list-valued field of a strategy entry (and ``cluster.seed``) is expanded
into a grid; rows come out in grid order. ``Q`` and ``x0`` files are optional
(identity and zero). ``K`` may be omitted; it then defaults to the code's
recovery threshold (or ``P`` for the baseline).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .coding import CodingParams, recovery_threshold, split_for_threshold
from .linalg import EXACT, FLOAT, SingularMatrixError, as_vector, eye, read_matrix, to_backend, zeros
from .sim import LEDGER_KEYS, ClusterConfig, StragglerModel, run_baseline, run_mrpolylin, run_polylin
from .solver import IterationSystem, error_norm, gd_cast, iterate, jacobi_cast

STRATEGIES = ("baseline", "polylin", "mrpolylin")
CASTS = ("raw", "jacobi", "gd")
FLOAT_TOL = 1e-6  # relative error allowed against the oracle on the float backend

COLUMNS = (
    "grid_index", "strategy", "backend", "N", "m", "n", "ell", "P", "K", "seed",
    "beta1", "beta2", "compute_rate", "straggler",
) + LEDGER_KEYS + ("stalled", "error_norm", "oracle_rel_err", "oracle_pass", "error")


class ConfigError(ValueError):
    """Raised with every problem found in a config, one per line."""


# -- problem generation ------------------------------------------------------


def _exact_rho_values(rng, N: int, rho: Fraction) -> list:
    """``N`` rationals of magnitude <= rho, the first equal to rho, in random order."""
    vals = [rho] + [rho * Fraction(int(rng.integers(-7, 8)), 8) for _ in range(N - 1)]
    return [vals[i] for i in rng.permutation(N)]


def _float_raw(rng, N: int, rho: float) -> np.ndarray:
    U, _ = np.linalg.qr(rng.standard_normal((N, N)))
    lam = rng.uniform(-0.8 * rho, 0.8 * rho, N)
    lam[0] = rho * rng.choice([-1.0, 1.0])
    return (U * lam) @ U.T


def _exact_raw(rng, N: int, rho: Fraction) -> np.ndarray:
    A = zeros((N, N), EXACT)
    for i, v in enumerate(_exact_rho_values(rng, N, rho)):
        A[i, i] = v
        for j in range(i + 1, N):
            A[i, j] = Fraction(int(rng.integers(-3, 4)), 4 * N)
    return A


def _jacobi_matrix(rng, N: int, rho, backend: str) -> np.ndarray:
    """``M = I - B`` with ``B`` zero on the diagonal and ``rho(B) = rho``.

    ``B`` is block upper triangular with 2x2 diagonal blocks ``[[0, r], [r, 0]]``
    (eigenvalues ``+-r``); the largest ``r`` equals ``rho``.
    """
    B = zeros((N, N), backend)
    pairs = N // 2
    for k in range(pairs):
        r = rho if k == 0 else rho * Fraction(int(rng.integers(0, 8)), 8)
        B[2 * k, 2 * k + 1] = r
        B[2 * k + 1, 2 * k] = r
    for i in range(N):
        for j in range(2 * (i // 2 + 1), N):
            v = Fraction(int(rng.integers(-3, 4)), 8 * N)
            B[i, j] = v if backend == EXACT else float(v)
    return eye(N, backend) - B


def _gd_matrix(rng, N: int, rho, backend: str) -> np.ndarray:
    """``M`` whose singular values ``s`` satisfy ``max |1 - (1-rho) s^2| = rho``.

    The largest term comes from ``s = 1``; the others keep a gap below ``rho``.
    Floats use ``U diag(s) V^T``, exact uses a diagonal ``M``.
    """
    hi = 1 + Fraction(8, 10) * 2 * Fraction(rho) / (1 - Fraction(rho))
    if backend == EXACT:
        M = zeros((N, N), EXACT)
        for i in range(N):
            s = 1 + Fraction(int(rng.integers(0, 9)), 16)
            M[i, i] = s if i and s * s <= hi else Fraction(1)
        return M
    s2 = rng.uniform(1.0, float(hi), N)
    s2[0] = 1.0
    U, _ = np.linalg.qr(rng.standard_normal((N, N)))
    V, _ = np.linalg.qr(rng.standard_normal((N, N)))
    return (U * np.sqrt(s2)) @ V.T


def generate_problem(N: int, target_rho: float, seed: int = 0, backend: str = FLOAT, cast: str = "raw",
                     n: int = 2) -> IterationSystem:
    """Random system with spectral radius ``target_rho``, ``x0 = 0`` and random ``y``.

    ``raw`` builds ``A`` directly with ``Q = I``. ``jacobi`` and ``gd`` build a
    matrix ``M`` and cast it (``gd`` with step ``1 - target_rho``). On the exact
    backend ``target_rho`` is turned into a nearby fraction and the radius
    holds exactly; on floats it holds up to rounding.
    """
    if not 0 < target_rho < 1:
        raise ValueError("target_rho must lie in (0, 1)")
    if N < 1:
        raise ValueError("N must be positive")
    if cast not in CASTS:
        raise ValueError(f"unknown cast {cast!r}; expected one of {CASTS}")
    if backend not in (EXACT, FLOAT):
        raise ValueError(f"unknown backend {backend!r}")
    rng = np.random.default_rng(seed)
    rho = Fraction(target_rho).limit_denominator(10 ** 6) if backend == EXACT else float(target_rho)
    if backend == EXACT:
        y = to_backend([int(v) for v in rng.integers(-5, 6, N)], EXACT)
    else:
        y = rng.standard_normal(N)
    x0 = zeros(N, backend)
    if cast == "raw":
        A = _exact_raw(rng, N, rho) if backend == EXACT else _float_raw(rng, N, rho)
        Q = eye(N, backend)
    elif cast == "jacobi":
        if N < 2:
            raise ValueError("the jacobi cast needs N >= 2")
        A, Q = jacobi_cast(_jacobi_matrix(rng, N, rho, backend))
    else:
        A, Q = gd_cast(_gd_matrix(rng, N, rho, backend), 1 - rho)
    return IterationSystem(A, Q, y, x0, n)


# -- experiment configs ------------------------------------------------------

_TOP_KEYS = {"problem", "backend", "pad", "strategies", "cluster", "out", "format"}
_STRATEGY_KEYS = {"strategy", "m", "n", "ell", "P", "K"}
_CLUSTER_KEYS = {"beta1", "beta2", "compute_rate", "straggler", "seed", "failed"}
_STRAGGLER_KEYS = {"kind", "shift", "rate", "prob", "delays"}


@dataclass(frozen=True)
class GridPoint:
    index: int
    strategy: str
    n: int
    P: int
    m: int | None = None
    ell: int | None = None
    K: int | None = None
    seed: int = 0


@dataclass
class ExperimentConfig:
    problem: dict = field(default_factory=lambda: {"N": 8, "target_rho": 0.5, "seed": 0, "cast": "raw"})
    backend: str = EXACT
    pad: bool = True
    strategies: list = field(default_factory=list)
    cluster: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: d[k] for k in _TOP_KEYS if k in d}
        cfg = cls(**kw, base_dir=Path(base_dir))
        cfg.strategies = [dict(s) for s in cfg.strategies]
        cfg.cluster = dict(cfg.cluster)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)

    def straggler(self) -> StragglerModel:
        spec = dict(self.cluster.get("straggler") or {"kind": "none"})
        unknown = set(spec) - _STRAGGLER_KEYS
        if unknown:
            raise ConfigError(f"unknown straggler keys: {sorted(unknown)}")
        if "delays" in spec:
            spec["delays"] = tuple(spec["delays"])
        return StragglerModel(**spec)

    def grid(self) -> list:
        """Expand list-valued fields into one :class:`GridPoint` each, in order."""
        seeds = self.cluster.get("seed", 0)
        seeds = seeds if isinstance(seeds, list) else [seeds]
        points = []
        for entry in self.strategies:
            unknown = set(entry) - _STRATEGY_KEYS
            if unknown:
                raise ConfigError(f"unknown strategy keys: {sorted(unknown)}")
            keys = sorted(entry)
            values = [entry[k] if isinstance(entry[k], list) else [entry[k]] for k in keys]
            for combo in itertools.product(*values):
                fields = dict(zip(keys, combo))
                for seed in seeds:
                    points.append(GridPoint(index=len(points), seed=seed, **fields))
        return points

    def problem_size(self) -> int:
        if "N" in self.problem:
            return int(self.problem["N"])
        return read_matrix(self.base_dir / self.problem["A"]).shape[0]

    def validate(self) -> list:
        """Check every grid point before running anything; raise :class:`ConfigError`."""
        errors = []
        if self.backend not in (EXACT, FLOAT):
            errors.append(f"backend must be 'exact' or 'float', got {self.backend!r}")
        if self.format not in ("csv", "json"):
            errors.append(f"format must be 'csv' or 'json', got {self.format!r}")
        unknown = set(self.cluster) - _CLUSTER_KEYS
        if unknown:
            errors.append(f"unknown cluster keys: {sorted(unknown)}")
        try:
            self.straggler()
        except (ValueError, TypeError) as exc:
            errors.append(f"bad straggler spec: {exc}")
        points = self.grid()
        N = self.problem_size()
        for p in points:
            errors += [f"grid point {p.index} ({p.strategy}): {e}" for e in _point_errors(p, N, self.pad)]
        if errors:
            raise ConfigError("\n".join(errors))
        return points


def _point_errors(p: GridPoint, N: int, pad: bool) -> list:
    errs = []
    if p.strategy not in STRATEGIES:
        return [f"unknown strategy {p.strategy!r}; expected one of {STRATEGIES}"]
    if p.n < 2 or p.n % 2:
        errs.append(f"n = {p.n} is odd or below 2; n must be even")
    if p.P < 1:
        errs.append(f"P = {p.P} must be positive")
    if p.K is not None and p.K > p.P:
        errs.append(f"K = {p.K} exceeds P = {p.P}")
    if p.strategy == "baseline":
        if p.K is not None and p.K != p.P:
            errs.append(f"the baseline waits for all workers; K = {p.K} must equal P = {p.P}")
        if not pad and N % p.P:
            errs.append(f"P = {p.P} does not divide N = {N} and padding is off")
        return errs
    ell = 1 if p.strategy == "polylin" else p.ell
    if ell is None or ell < 1:
        errs.append("mrpolylin needs ell >= 1")
        return errs
    if p.strategy == "polylin" and p.ell not in (None, 1):
        errs.append(f"polylin runs a single phase; got ell = {p.ell}")
    if p.n % ell:
        errs.append(f"ell = {ell} does not divide n = {p.n}")
        return errs
    per = p.n // ell
    if per % 2:
        errs.append(f"n/ell = {per} is odd; each phase needs an even iteration count")
        return errs
    m = p.m
    if m is None:
        if p.K is None:
            errs.append("give m or K")
            return errs
        m = split_for_threshold(p.K, per)
        if m is None:
            errs.append(f"K = {p.K} is not of the form 2 m^{per // 2} - 1")
            return errs
    if m < 1:
        errs.append(f"m = {m} must be >= 1")
        return errs
    need = recovery_threshold(m, per)
    if p.K is not None and p.K < need:
        errs.append(f"K = {p.K} is below the recovery threshold {need} for m = {m}, n/ell = {per}")
    if need > p.P:
        errs.append(f"recovery threshold {need} exceeds P = {p.P}")
    if not pad and N % m:
        errs.append(f"m = {m} does not divide N = {N} and padding is off")
    return errs


def load_problem(cfg: ExperimentConfig) -> IterationSystem:
    """The system described by ``cfg.problem`` with ``n = 2`` (grid points set their own)."""
    pr = cfg.problem
    if "A" in pr:
        A = read_matrix(cfg.base_dir / pr["A"], cfg.backend)
        N = A.shape[0]
        Q = read_matrix(cfg.base_dir / pr["Q"], cfg.backend) if pr.get("Q") else eye(N, cfg.backend)
        if "y" not in pr:
            raise ConfigError("a file-based problem needs a 'y' file")
        y = as_vector(read_matrix(cfg.base_dir / pr["y"], cfg.backend))
        x0 = as_vector(read_matrix(cfg.base_dir / pr["x0"], cfg.backend)) if pr.get("x0") else zeros(N, cfg.backend)
        return IterationSystem(A, Q, y, x0, 2)
    unknown = set(pr) - {"N", "target_rho", "seed", "cast"}
    if unknown:
        raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
    return generate_problem(int(pr["N"]), float(pr.get("target_rho", 0.5)), int(pr.get("seed", 0)),
                            cfg.backend, pr.get("cast", "raw"))


# -- running -----------------------------------------------------------------


def _num(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _oracle(x, ref) -> tuple:
    if x is None:
        return None, False
    if x.dtype == object:
        ok = bool(all(a == b for a, b in zip(x, ref)))
        if ok:
            return 0.0, True
        x, ref = np.array(x, dtype=float), np.array(ref, dtype=float)
        return float(np.linalg.norm(x - ref) / max(np.linalg.norm(ref), 1e-300)), False
    rel = float(np.linalg.norm(x - ref) / max(np.linalg.norm(ref), 1e-300))
    return rel, rel <= FLOAT_TOL


def run_point(base: IterationSystem, p: GridPoint, cfg: ExperimentConfig) -> dict:
    """Run one grid point and compare it with the centralized solver."""
    straggler = cfg.straggler()
    c = cfg.cluster
    row = {k: None for k in COLUMNS}
    row.update(grid_index=p.index, strategy=p.strategy, backend=cfg.backend, N=base.N, n=p.n, P=p.P,
               seed=p.seed, beta1=float(c.get("beta1", 0)), beta2=float(c.get("beta2", 0)),
               compute_rate=float(c.get("compute_rate", 0)), straggler=straggler.describe(),
               stalled=False, oracle_pass=False)
    sys = base.with_n(p.n)
    try:
        if p.strategy == "baseline":
            K = p.P
            ell = m = None
        else:
            ell = 1 if p.strategy == "polylin" else p.ell
            per = p.n // ell
            m = p.m if p.m is not None else split_for_threshold(p.K, per)
            K = p.K
        row.update(m=m, ell=ell)
        cluster = ClusterConfig(P=p.P, K=K, beta1=row["beta1"], beta2=row["beta2"], straggler=straggler,
                                seed=p.seed, compute_rate=row["compute_rate"],
                                failed=frozenset(c.get("failed", ())))
        if p.strategy == "baseline":
            res = run_baseline(sys, cluster)
        elif p.strategy == "polylin":
            res = run_polylin(sys, CodingParams.create(m, p.n, p.P, cfg.backend), cluster)
        else:
            res = run_mrpolylin(sys, CodingParams.create(m, p.n // ell, p.P, cfg.backend), ell, cluster)
        row["K"] = K if K is not None else recovery_threshold(m, p.n // ell)
        row.update({k: _num(v) for k, v in res.ledger.to_dict().items()})
        row["stalled"] = res.stalled
        if res.stalled:
            row["error"] = "stalled: a worker never answered"
            return row
        row["oracle_rel_err"], row["oracle_pass"] = _oracle(res.x, iterate(sys))
        try:
            row["error_norm"] = error_norm(sys, res.x)
        except SingularMatrixError:
            row["error_norm"] = None
    except (ValueError, RuntimeError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list:
    """One row per grid point, in grid order; failures are recorded, not raised."""
    points = cfg.validate()
    if not points:
        return []
    base = load_problem(cfg)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda p: run_point(base, p, cfg), points))
    return [run_point(base, p, cfg) for p in points]


def emit_report(rows, fmt: str = "csv", path=None) -> str:
    """Serialize rows with the fixed :data:`COLUMNS` order; write to ``path`` if given.

    CSV leaves missing values empty; JSON is an array of flat objects with ``null``.
    """
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if r.get(k) is None else r[k] for k in COLUMNS})
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([{k: r.get(k) for k in COLUMNS} for r in rows], indent=2) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text
