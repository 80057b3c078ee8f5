"""Kill workers and watch which strategies still finish.

The uncoded baseline needs every worker in every round; PolyLin only needs
its recovery threshold, and MRPolyLin needs a smaller one per phase.

    python demos/stragglers.py
"""

from polylin import ClusterConfig, CodingParams, EXACT, generate_problem, iterate, run_baseline, run_mrpolylin, run_polylin

P, n = 10, 4
sys = generate_problem(8, 0.5, seed=3, backend=EXACT, n=n)
ref = iterate(sys)
poly = CodingParams.create(2, n, P, EXACT)
mr = CodingParams.create(2, n // 2, P, EXACT)

print(f"PolyLin waits for {poly.K} of {P}, MRPolyLin for {mr.K} of {P} in each of 2 rounds")
print(f"{'dead workers':<16}{'baseline':<12}{'polylin':<12}{'mrpolylin':<12}")
for dead in (0, 1, 3, 5, 7, 8):
    cfg = ClusterConfig(P=P, failed=frozenset(range(dead)))

    def status(run):
        try:
            res = run()
        except Exception:
            return "stalls"
        if res.stalled:
            return "stalls"
        return "exact" if all(res.x == ref) else "WRONG"

    print(f"{dead:<16}{status(lambda: run_baseline(sys, cfg)):<12}"
          f"{status(lambda: run_polylin(sys, poly, cfg)):<12}"
          f"{status(lambda: run_mrpolylin(sys, mr, 2, cfg)):<12}")
