import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import exact_system, same
from polylin.coding import CodingParams, DecodeError
from polylin.linalg import EXACT, FLOAT
from polylin.sim import (
    LEDGER_KEYS,
    ClusterConfig,
    StallError,
    StragglerModel,
    predicted_costs,
    run_baseline,
    run_mrpolylin,
    run_polylin,
    simulate_round,
)
from polylin.solver import iterate


def cp(m, n, P, backend=EXACT):
    return CodingParams.create(m, n, P, backend)


def test_round_tie_break_and_order_statistic():
    cfg = ClusterConfig(P=5, K=4)
    assert simulate_round([10] * 5, cfg, 0) == ((0, 1, 2, 3), 0.0)
    slow = ClusterConfig(P=5, K=4, straggler=StragglerModel("fixed", delays=(0, 0, 5, 0, 0)))
    chosen, elapsed = simulate_round([10] * 5, slow, 0)
    assert 2 not in chosen and elapsed == 0.0
    timed = ClusterConfig(P=3, K=2, compute_rate=0.5)
    assert simulate_round([4, 1, 2], timed, 0) == ((1, 2), 1.0)


def test_round_stalls_without_enough_finishers():
    cfg = ClusterConfig(P=3, K=3, failed={1})
    with pytest.raises(StallError):
        simulate_round([1, 1, 1], cfg, 0)
    with pytest.raises(StallError):
        simulate_round([1, None, 1], ClusterConfig(P=3, K=3), 0)


def test_straggler_streams_are_reproducible():
    model = StragglerModel("shifted-exponential", shift=0.5, rate=2.0)
    cfg = ClusterConfig(P=10, K=7, straggler=model, seed=123)
    runs = [[simulate_round([5] * 10, cfg, r) for r in range(4)] for _ in range(2)]
    assert runs[0] == runs[1]
    assert len({r[0] for r in runs[0]}) > 1  # rounds draw different delays


@given(st.integers(0, 2 ** 31), st.integers(0, 20), st.integers(0, 50),
       st.floats(0, 5), st.floats(0.1, 10), st.floats(0, 1))
def test_straggler_delays_are_valid(seed, worker, rnd, shift, rate, prob):
    d = StragglerModel("shifted-exponential", shift=shift, rate=rate).delay(seed, worker, rnd)
    assert d >= shift
    f = StragglerModel("fail", prob=prob).delay(seed, worker, rnd)
    assert f == 0.0 or f == math.inf
    assert StragglerModel("fail", prob=1.0).delay(seed, worker, rnd) == math.inf


def test_bad_configs():
    with pytest.raises(ValueError):
        ClusterConfig(P=3, K=4)
    with pytest.raises(ValueError):
        ClusterConfig(P=3, beta1=-1)
    with pytest.raises(ValueError):
        StragglerModel("sometimes")
    with pytest.raises(ValueError):
        ClusterConfig(P=3, failed={3})


def test_baseline_examples():
    sys = exact_system(1, 6, 4)
    res = run_baseline(sys, ClusterConfig(P=3, beta1=2.0, beta2=0.5))
    led = res.ledger
    assert same(res.x, iterate(sys))
    assert led.rounds == 4 and led.words_down == 4 * 6 and led.words_up == 4 * 2
    assert led.comm_cost == pytest.approx(2.0 * 4 + 0.5 * 4 * (1 + 3) / 3 * 6)
    assert res.responder_sets == [(0, 1, 2)] * 4 and led.stragglers_tolerated == 0
    stalled = run_baseline(sys, ClusterConfig(P=3, failed={2}))
    assert stalled.stalled and stalled.x is None and stalled.ledger.sim_time == math.inf
    assert stalled.to_dict()["sim_time"] is None
    with pytest.raises(ValueError):
        run_baseline(sys, ClusterConfig(P=3, K=2))


def test_baseline_fail_model_stalls():
    sys = exact_system(2, 4, 2)
    res = run_baseline(sys, ClusterConfig(P=4, straggler=StragglerModel("fail", prob=1.0)))
    assert res.stalled and res.ledger.sim_time == math.inf


def test_polylin_examples():
    sys = exact_system(3, 8, 4)
    res = run_polylin(sys, cp(2, 4, 10), ClusterConfig(P=10, beta1=1.0, beta2=0.25))
    led = res.ledger
    assert same(res.x, iterate(sys))
    assert led.rounds == 1 and led.words_down == 8 and led.words_up == 8
    assert led.comm_cost == 1.0 + 0.25 * 16
    assert led.worker_mults == 4 * 64 // 2
    assert len(res.responder_sets[0]) == 7 and led.stragglers_tolerated == 3
    down = run_polylin(sys, cp(2, 4, 10), ClusterConfig(P=10, failed={0, 4, 9}))
    assert same(down.x, iterate(sys)) and 0 not in down.responder_sets[0]
    with pytest.raises(DecodeError):
        run_polylin(sys, cp(2, 4, 10), ClusterConfig(P=10, failed={0, 1, 2, 3}))


def test_polylin_waiting_for_more_than_needed():
    sys = exact_system(4, 4, 2)
    res = run_polylin(sys, cp(2, 2, 6), ClusterConfig(P=6, K=5))
    assert same(res.x, iterate(sys)) and res.ledger.stragglers_tolerated == 1
    with pytest.raises(ValueError):
        run_polylin(sys, cp(2, 2, 6), ClusterConfig(P=6, K=2))


def test_mrpolylin_examples():
    sys = exact_system(5, 4, 6)
    res = run_mrpolylin(sys, cp(2, 2, 4), 3, ClusterConfig(P=4, beta1=1.0, beta2=0.5))
    assert cp(2, 2, 4).K == 3
    assert same(res.x, iterate(sys))
    assert res.ledger.rounds == 3 and res.ledger.comm_cost == 3 * 1.0 + 0.5 * 2 * 3 * 4
    assert all(len(s) == 3 for s in res.responder_sets)
    with pytest.raises(ValueError):
        run_mrpolylin(sys, cp(2, 2, 4), 4, ClusterConfig(P=4))
    with pytest.raises(ValueError):
        run_mrpolylin(sys, cp(2, 2, 4), 6, ClusterConfig(P=4))
    with pytest.raises(ValueError):
        run_mrpolylin(sys, cp(2, 2, 4), 1, ClusterConfig(P=4))


def test_single_phase_equals_polylin_bit_exactly():
    rng = np.random.default_rng(0)
    from polylin.solver import IterationSystem

    sys = IterationSystem(0.2 * rng.standard_normal((6, 6)), np.eye(6), rng.standard_normal(6), np.zeros(6), 4)
    cfg = ClusterConfig(P=9, beta1=3.0, beta2=0.1, compute_rate=1e-3, seed=7,
                        straggler=StragglerModel("shifted-exponential", shift=0.1, rate=3.0))
    p = cp(2, 4, 9, FLOAT)
    a, b = run_polylin(sys, p, cfg), run_mrpolylin(sys, p, 1, cfg)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.to_dict() == b.to_dict()


def test_run_is_deterministic():
    sys = exact_system(6, 4, 4)
    cfg = ClusterConfig(P=8, seed=3, compute_rate=0.01,
                        straggler=StragglerModel("shifted-exponential", shift=0.2, rate=1.0))
    dumps = [json.dumps(run_polylin(sys, cp(2, 4, 8), cfg).to_dict()) for _ in range(2)]
    assert dumps[0] == dumps[1]


def test_ledger_serializes_flat():
    sys = exact_system(7, 4, 2)
    d = run_polylin(sys, cp(2, 2, 3), ClusterConfig(P=3)).to_dict()
    assert set(LEDGER_KEYS) <= set(d) and {"stalled", "responder_sets", "x"} <= set(d)
    assert json.loads(json.dumps(d)) == d
    assert all(isinstance(v, str) for v in d["x"])


def test_predicted_cost_examples():
    pl = predicted_costs("polylin", 100, 10, None, 4, 1, beta1=1, beta2=0.01, m=2)
    assert pl.comm_cost == pytest.approx(3.0) and pl.rounds == 1 and pl.stragglers_tolerated == 3
    assert pl.worker_mults == 4 * 100 ** 2 // 2 and pl.storage_words == 5 * 100 ** 2 // 2
    b = predicted_costs("baseline", 50, 1, 1, 1, beta1=2, beta2=0.1)
    assert b.comm_cost == pytest.approx(2 + 2 * 50 * 0.1)
    for ell in (1, 2, 4):
        assert predicted_costs("mrpolylin", 12, 40, None, 8, ell, m=2).rounds == ell
    mr = predicted_costs("mrpolylin", 12, 10, 3, 4, 2)
    assert mr.worker_mults == 4 * 144 // 2 and mr.storage_words == 3 * 144 // 2
    assert predicted_costs("polylin", 8, 10, 7, 4).worker_mults == 4 * 64 // 2
    with pytest.raises(ValueError):
        predicted_costs("polylin", 8, 10, 8, 4)
    with pytest.raises(ValueError):
        predicted_costs("mrpolylin", 8, 10, None, 6, 4, m=2)
    with pytest.raises(ValueError):
        predicted_costs("polylin", 8, 5, None, 4, m=2)


def _coded_grid(n):
    """Every (m, ell) with ell | n, n/ell even and a recovery threshold of at most 15."""
    for m in (1, 2, 3):
        for ell in range(1, n + 1):
            if n % ell == 0 and (n // ell) % 2 == 0 and m ** (n // ell // 2) <= 8:
                yield m, ell


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 8), st.sampled_from([2, 4, 6]))
def test_protocols_agree_with_oracle(seed, N, n):
    sys = exact_system(seed, N, n)
    ref = iterate(sys)
    assert same(run_baseline(sys, ClusterConfig(P=min(N, 3))).x, ref)
    for m, ell in _coded_grid(n):
        p = cp(m, n // ell, 2 * m ** (n // ell // 2))
        cfg = ClusterConfig(P=p.P)
        if ell == 1:
            assert same(run_polylin(sys, p, cfg).x, ref)
        assert same(run_mrpolylin(sys, p, ell, cfg).x, ref)


def test_every_straggler_subset_is_tolerated():
    sys = exact_system(8, 4, 4)
    ref = iterate(sys)
    P, K = 10, 7
    for failed in itertools.combinations(range(P), P - K):
        res = run_polylin(sys, cp(2, 4, P), ClusterConfig(P=P, failed=frozenset(failed)))
        assert same(res.x, ref) and not set(failed) & set(res.responder_sets[0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(50, 500))
def test_round_cost_dominates(seed, beta1):
    sys = exact_system(seed, 4, 4)
    straggler = StragglerModel("shifted-exponential", shift=0.1, rate=2.0)
    beta2 = beta1 / (1000 * 4 * 4)
    poly = run_polylin(sys, cp(2, 4, 8), ClusterConfig(P=8, beta1=beta1, beta2=beta2, straggler=straggler, seed=seed))
    base = run_baseline(sys, ClusterConfig(P=4, beta1=beta1, beta2=beta2, straggler=straggler, seed=seed))
    assert poly.ledger.sim_time < base.ledger.sim_time
