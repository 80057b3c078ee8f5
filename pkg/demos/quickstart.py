"""Encode, compute on every worker, then decode from an arbitrary K of them.

Runs on exact rationals, so the decoded vector is compared with plain
iteration by equality rather than a tolerance.

    python demos/quickstart.py
"""

import itertools
from fractions import Fraction

import numpy as np

from polylin import CodingParams, EXACT, IterationSystem, decode, iterate, make_shards, to_backend, worker_eta

rng = np.random.default_rng(1)
N, m, n, P = 6, 2, 4, 10


def rand_exact(shape):
    vals = rng.integers(-4, 5, size=shape)
    return to_backend(vals.astype(object) * Fraction(1, 8), EXACT)


sys = IterationSystem(rand_exact((N, N)), rand_exact((N, N)), rand_exact(N), rand_exact(N), n)
params = CodingParams.create(m, n, P, EXACT)
print(f"N={N}, m={m}, n={n}: recovery threshold K={params.K} out of P={P} workers")

shards = make_shards(sys.A, sys.Q, params)
evals = [worker_eta(s, sys.x0, sys.y) for s in shards]
print(f"each worker stores {len(shards[0].A1)} levels of {shards[0].A1[0].shape} and {shards[0].A2[0].shape} "
      f"blocks instead of the {N}x{N} matrix")

ref = iterate(sys)
subsets = list(itertools.combinations(range(P), params.K))
agree = sum(all(decode([evals[i] for i in sub], m, n, N) == ref) for sub in subsets)
print(f"x(n) recovered exactly from {agree} of {len(subsets)} possible responder sets")
print("x(n) =", [str(v) for v in ref])
