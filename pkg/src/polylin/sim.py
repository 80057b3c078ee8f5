"""Deterministic master/worker simulation of the three protocols.

Everything that depends only on ``(A, Q, y)`` is setup work: shard
placement, ``y`` itself and the ``y`` part of each worker's output. Its size
and multiply count are reported under ``offline_*`` and kept out of the
per-run figures.

Time is virtual. A round costs ``beta1 + beta2 * (words down + words up)``
plus the time until the master has heard from the workers it waits for. A
worker's finish time is ``compute_rate * multiplies + delay``; the delay comes
from a :class:`StragglerModel` stream seeded by ``(seed, worker, round)``, so
a run is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .coding import (
    CodingParams,
    DecodeError,
    EtaEval,
    decode,
    make_shards,
    recovery_threshold,
    split_for_threshold,
    worker_r,
    worker_s,
)
from .linalg import OpCounter, mat_vec, split_horizontal, zero_pad
from .solver import IterationSystem

STRAGGLER_KINDS = ("none", "shifted-exponential", "fail", "fixed")


class StallError(RuntimeError):
    """Fewer workers than the master waits for ever finish."""


@dataclass(frozen=True)
class StragglerModel:
    """Extra per-worker latency added on top of compute time.

    ``shifted-exponential``: ``shift + Exp(rate)``; ``fail``: the worker never
    answers with probability ``prob``; ``fixed``: ``delays[w]`` for worker ``w``.
    """

    kind: str = "none"
    shift: float = 0.0
    rate: float = 1.0
    prob: float = 0.0
    delays: tuple = ()

    def __post_init__(self):
        if self.kind not in STRAGGLER_KINDS:
            raise ValueError(f"unknown straggler kind {self.kind!r}")
        if self.shift < 0 or self.rate <= 0:
            raise ValueError("shifted-exponential needs shift >= 0 and rate > 0")
        if not 0 <= self.prob <= 1:
            raise ValueError("failure probability must lie in [0, 1]")
        if any(d < 0 for d in self.delays):
            raise ValueError("fixed delays must be non-negative")

    def delay(self, seed: int, worker: int, round_index: int) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "fixed":
            return float(self.delays[worker]) if worker < len(self.delays) else 0.0
        rng = np.random.default_rng([seed, worker, round_index])
        if self.kind == "fail":
            return math.inf if rng.random() < self.prob else 0.0
        return self.shift + rng.exponential(1.0 / self.rate)

    def describe(self) -> str:
        if self.kind == "shifted-exponential":
            return f"shifted-exponential(shift={self.shift},rate={self.rate})"
        if self.kind == "fail":
            return f"fail(prob={self.prob})"
        if self.kind == "fixed":
            return "fixed(" + ",".join(str(d) for d in self.delays) + ")"
        return "none"


@dataclass(frozen=True)
class ClusterConfig:
    """``K=None`` lets each protocol wait for exactly as many workers as it needs.

    ``failed`` lists workers that never answer, in addition to whatever the
    straggler model decides.
    """

    P: int
    K: int | None = None
    beta1: float = 0.0
    beta2: float = 0.0
    straggler: StragglerModel = field(default_factory=StragglerModel)
    seed: int = 0
    compute_rate: float = 0.0
    failed: frozenset = frozenset()

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("need at least one worker")
        if self.K is not None and not 1 <= self.K <= self.P:
            raise ValueError(f"K must satisfy 1 <= K <= P = {self.P}, got {self.K}")
        if self.beta1 < 0 or self.beta2 < 0 or self.compute_rate < 0:
            raise ValueError("beta1, beta2 and compute_rate must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "failed", frozenset(self.failed))
        if any(not 0 <= w < self.P for w in self.failed):
            raise ValueError("failed worker index out of range")


@dataclass
class CostLedger:
    """Cost tally of one run.

    ``words_*`` and ``worker_mults`` are per worker (max over workers), summed
    over rounds. ``offline_words`` and ``offline_mults`` cover setup for the
    busiest worker.
    """

    rounds: int = 0
    words_down: float = 0
    words_up: float = 0
    worker_mults: float = 0
    master_mults: float = 0
    sim_time: float | None = 0.0
    stragglers_tolerated: int = 0
    comm_cost: float = 0.0
    storage_words: float = 0
    offline_words: float = 0
    offline_mults: float = 0

    def to_dict(self) -> dict:
        return {k: _json_number(v) for k, v in asdict(self).items()}


LEDGER_KEYS = tuple(CostLedger.__dataclass_fields__)


def _json_number(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _scalar_text(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return repr(float(v))


@dataclass(eq=False)
class RunResult:
    x: np.ndarray | None
    ledger: CostLedger
    responder_sets: list
    stalled: bool = False

    def to_dict(self) -> dict:
        """Flat JSON-ready mapping: ledger keys plus ``stalled``, ``responder_sets``
        and ``x`` (strings, so exact values survive)."""
        out = self.ledger.to_dict()
        out["stalled"] = self.stalled
        out["responder_sets"] = [list(s) for s in self.responder_sets]
        out["x"] = None if self.x is None else [_scalar_text(v) for v in self.x]
        return out


def simulate_round(tasks: Sequence[float], cfg: ClusterConfig, round_index: int, K: int | None = None):
    """Pick the ``K`` earliest finishers of one round.

    ``tasks[w]`` is worker ``w``'s multiply count, or ``None`` if it does not
    run. Ties go to the lower worker index. Returns ``(responders, elapsed)``
    with responders in finishing order and ``elapsed`` the K-th finish time.
    """
    K = cfg.K if K is None else K
    if K is None:
        K = cfg.P
    if len(tasks) != cfg.P:
        raise ValueError(f"expected {cfg.P} tasks, got {len(tasks)}")
    finish = []
    for w, mults in enumerate(tasks):
        if mults is None or w in cfg.failed:
            t = math.inf
        else:
            t = cfg.compute_rate * mults + cfg.straggler.delay(cfg.seed, w, round_index)
        finish.append((t, w))
    finish.sort()
    chosen = finish[:K]
    if len(chosen) < K or not math.isfinite(chosen[-1][0]):
        alive = sum(math.isfinite(t) for t, _ in finish)
        raise StallError(f"round {round_index}: only {alive} of {cfg.P} workers finish, need {K}")
    return tuple(w for _, w in chosen), chosen[-1][0]


def _alive(cfg: ClusterConfig, round_index: int) -> list:
    """Workers that will produce a result this round (skips work for the rest)."""
    return [w not in cfg.failed and math.isfinite(cfg.straggler.delay(cfg.seed, w, round_index))
            for w in range(cfg.P)]


def run_baseline(sys: IterationSystem, cfg: ClusterConfig) -> RunResult:
    """Row-block parallel iteration: one round per iteration, waits for all ``P``.

    Worker ``i`` keeps ``A_i``, ``Q_i`` and ``y`` from setup and precomputes
    ``b_i = Q_i y`` there; each round it returns ``A_i x + b_i``.
    """
    if cfg.K is not None and cfg.K != cfg.P:
        raise ValueError("the baseline waits for every worker; K must equal P")
    P, N = cfg.P, sys.N
    A, Q, x, y, _ = zero_pad(sys.A, sys.Q, sys.x0, sys.y, P)
    Np = A.shape[0]
    rows = Np // P
    A_blocks = split_horizontal(A, P).blocks
    setup = OpCounter()
    b_blocks = [mat_vec(Qi, y, setup) for Qi in split_horizontal(Q, P).blocks]

    led = CostLedger(storage_words=2 * rows * Np, stragglers_tolerated=0)
    led.offline_words = led.storage_words + Np
    led.offline_mults = setup.mults // P
    responders = []
    for k in range(sys.n):
        alive = _alive(cfg, k)
        counters = [OpCounter() for _ in range(P)]
        parts = [mat_vec(A_blocks[i], x, counters[i]) + b_blocks[i] if alive[i] else None
                 for i in range(P)]
        led.rounds += 1
        led.words_down += Np
        led.words_up += rows
        led.worker_mults += max(c.mults for c in counters)
        try:
            chosen, elapsed = simulate_round([c.mults if a else None for c, a in zip(counters, alive)],
                                             cfg, k, K=P)
        except StallError:
            led.sim_time = math.inf
            led.comm_cost = cfg.beta1 * led.rounds + cfg.beta2 * (led.words_down + led.words_up)
            return RunResult(None, led, responders, stalled=True)
        responders.append(tuple(sorted(chosen)))
        led.sim_time += cfg.beta1 + cfg.beta2 * (Np + rows) + elapsed
        x = np.concatenate(parts)
    led.comm_cost = cfg.beta1 * led.rounds + cfg.beta2 * (led.words_down + led.words_up)
    return RunResult(x[:N], led, responders)


def _wait_count(cfg: ClusterConfig, code_K: int) -> int:
    K = code_K if cfg.K is None else cfg.K
    if K < code_K:
        raise ValueError(f"waiting for K = {K} workers cannot decode; the code needs {code_K}")
    if K > cfg.P:
        raise ValueError(f"K = {K} exceeds P = {cfg.P}")
    return K


def _polylin_round(shards, s_parts, params: CodingParams, x0, cfg: ClusterConfig, round_index: int,
                   wait: int):
    alive = _alive(cfg, round_index)
    counters = [OpCounter() for _ in range(cfg.P)]
    evals = [EtaEval(shards[w].xi, worker_r(shards[w], x0, params.n, params.m, counters[w]) + s_parts[w])
             if alive[w] else None for w in range(cfg.P)]
    try:
        chosen, elapsed = simulate_round([c.mults if a else None for c, a in zip(counters, alive)],
                                         cfg, round_index, K=wait)
    except StallError as exc:
        raise DecodeError(f"decode impossible: {exc}") from exc
    master = OpCounter()
    x = decode([evals[w] for w in chosen[:params.K]], params.m, params.n, counter=master)
    worker_mults = max(c.mults for c, a in zip(counters, alive) if a)
    return x, chosen, elapsed, worker_mults, master.mults


def _setup(sys: IterationSystem, params: CodingParams, shards=None):
    """Pad, place shards and precompute every worker's ``y`` part."""
    A, Q, x0, y, N = zero_pad(sys.A, sys.Q, sys.x0, sys.y, params.m)
    if shards is None:
        shards = make_shards(A, Q, params)
    setup = [OpCounter() for _ in shards]
    s_parts = [worker_s(sh, y, params.n, params.m, c) for sh, c in zip(shards, setup)]
    led = CostLedger(storage_words=max(sh.storage_words for sh in shards),
                     offline_mults=max(c.mults for c in setup))
    led.offline_words = led.storage_words + A.shape[0]
    return shards, s_parts, x0, A.shape[0], N, led


def run_polylin(sys: IterationSystem, params: CodingParams, cfg: ClusterConfig, shards=None) -> RunResult:
    """One round: every worker runs all ``n`` iterations on its encoded shard,
    the master interpolates from the fastest ``K``."""
    if params.n != sys.n:
        raise ValueError(f"coding parameters are for n = {params.n}, system has n = {sys.n}")
    if params.P != cfg.P:
        raise ValueError(f"coding parameters are for P = {params.P}, cluster has P = {cfg.P}")
    wait = _wait_count(cfg, params.K)
    shards, s_parts, x0, Np, N, led = _setup(sys, params, shards)
    x, chosen, elapsed, wm, mm = _polylin_round(shards, s_parts, params, x0, cfg, 0, wait)
    led.rounds = 1
    led.words_down = Np
    led.words_up = Np
    led.worker_mults = wm
    led.master_mults = mm
    led.stragglers_tolerated = cfg.P - wait
    led.comm_cost = cfg.beta1 + cfg.beta2 * 2 * Np
    led.sim_time = led.comm_cost + elapsed + cfg.compute_rate * mm
    return RunResult(x[:N], led, [tuple(sorted(chosen))])


def run_mrpolylin(sys: IterationSystem, params: CodingParams, ell: int, cfg: ClusterConfig) -> RunResult:
    """``ell`` sequential PolyLin phases of ``n/ell`` iterations each.

    ``params`` describes one phase, so ``params.n`` must equal ``n/ell``. The
    master decodes ``x`` after every phase and broadcasts it as the next
    starting point; shards and ``y`` parts are set up once and reused.
    """
    if ell < 1 or sys.n % ell:
        raise ValueError(f"ell = {ell} must divide n = {sys.n}")
    per = sys.n // ell
    if per < 2 or per % 2:
        raise ValueError(f"n/ell = {per} must be even and >= 2")
    if params.n != per:
        raise ValueError(f"phase parameters are for n = {params.n}, expected n/ell = {per}")
    if params.P != cfg.P:
        raise ValueError(f"coding parameters are for P = {params.P}, cluster has P = {cfg.P}")
    wait = _wait_count(cfg, params.K)
    shards, s_parts, x, Np, N, led = _setup(sys, params)
    led.stragglers_tolerated = cfg.P - wait
    led.sim_time = 0.0
    responders = []
    for j in range(ell):
        x, chosen, elapsed, wm, mm = _polylin_round(shards, s_parts, params, x, cfg, j, wait)
        responders.append(tuple(sorted(chosen)))
        led.rounds += 1
        led.words_down += Np
        led.words_up += Np
        led.worker_mults += wm
        led.master_mults += mm
        led.sim_time += cfg.beta1 + cfg.beta2 * 2 * Np + elapsed + cfg.compute_rate * mm
    led.comm_cost = cfg.beta1 * ell + cfg.beta2 * 2 * ell * Np
    return RunResult(x[:N], led, responders)


def _exact_number(v: Fraction):
    return int(v) if v.denominator == 1 else float(v)


def predicted_costs(strategy: str, N: int, P: int, K: int | None, n: int, ell: int = 1,
                    beta1: float = 0.0, beta2: float = 0.0, m: int | None = None) -> CostLedger:
    """Closed-form costs per strategy (``sim_time`` is left unset).

    ``m`` defaults to the split factor implied by ``K``: ``((K+1)/2)^(2/n)`` for
    PolyLin, ``((K+1)/2)^(2 ell/n)`` per phase for MRPolyLin.
    """
    if N < 1 or P < 1 or n < 1:
        raise ValueError("N, P and n must be positive")
    N_, P_, n_ = Fraction(N), Fraction(P), Fraction(n)
    if strategy == "baseline":
        down, up = n_ * N_, n_ * N_ / P_
        return CostLedger(
            rounds=n,
            words_down=_exact_number(down),
            words_up=_exact_number(up),
            worker_mults=_exact_number(n_ * N_ ** 2 / P_),
            storage_words=_exact_number(N_ ** 2 / P_),
            comm_cost=beta1 * n + beta2 * float(down + up),
            stragglers_tolerated=0,
            sim_time=None,
        )
    if strategy not in ("polylin", "mrpolylin"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "polylin":
        ell = 1
    if ell < 1 or n % ell or (n // ell) % 2:
        raise ValueError(f"need ell | n with n/ell even, got n={n}, ell={ell}")
    per = n // ell
    if m is None:
        if K is None:
            raise ValueError("give either K or m")
        m = split_for_threshold(K, per)
        if m is None:
            raise ValueError(f"K = {K} is not of the form 2 m^{per // 2} - 1")
    if K is None:
        K = recovery_threshold(m, per)
    if K != recovery_threshold(m, per):
        raise ValueError(f"K = {K} does not match m = {m}, n/ell = {per}")
    if K > P:
        raise ValueError(f"K = {K} exceeds P = {P}")
    m_, l_ = Fraction(m), Fraction(ell)
    return CostLedger(
        rounds=ell,
        words_down=ell * N,
        words_up=ell * N,
        worker_mults=_exact_number(n_ * N_ ** 2 / m_),
        storage_words=_exact_number((n_ + l_) / l_ * N_ ** 2 / m_),
        comm_cost=beta1 * ell + beta2 * 2 * ell * N,
        stragglers_tolerated=P - K,
        sim_time=None,
    )
