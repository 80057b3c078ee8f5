import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from polylin.linalg import EXACT, to_backend
from polylin.solver import IterationSystem


def rand_frac(rnd, lo=-3, hi=3, den=4):
    return Fraction(rnd.randint(lo, hi), rnd.randint(1, den))


def exact_matrix(rnd, rows, cols=None):
    cols = rows if cols is None else cols
    return to_backend([[rand_frac(rnd) for _ in range(cols)] for _ in range(rows)], EXACT)


def exact_vector(rnd, N):
    return to_backend([Fraction(rnd.randint(-3, 3)) for _ in range(N)], EXACT)


def exact_system(seed, N, n):
    """Random rational system; entries are small so exact runs stay fast."""
    rnd = random.Random(seed)
    return IterationSystem(exact_matrix(rnd, N), exact_matrix(rnd, N), exact_vector(rnd, N),
                           exact_vector(rnd, N), n)


def same(a, b):
    return a.shape == b.shape and all(x == y for x, y in zip(a.reshape(-1), b.reshape(-1)))


fractions = st.fractions(min_value=-4, max_value=4, max_denominator=6)


@st.composite
def exact_systems(draw, max_N=6, ns=(2, 4)):
    N = draw(st.integers(1, max_N))
    n = draw(st.sampled_from(ns))
    mat = lambda: to_backend(np.array(draw(st.lists(fractions, min_size=N * N, max_size=N * N)),
                                      dtype=object).reshape(N, N), EXACT)
    vec = lambda: to_backend(draw(st.lists(fractions, min_size=N, max_size=N)), EXACT)
    return IterationSystem(mat(), mat(), vec(), vec(), n)


@pytest.fixture
def half_system():
    A = to_backend([[Fraction(1, 2), 0], [0, Fraction(1, 2)]], EXACT)
    I = to_backend([[1, 0], [0, 1]], EXACT)
    return IterationSystem(A, I, to_backend([1, 1], EXACT), to_backend([0, 0], EXACT), 2)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
