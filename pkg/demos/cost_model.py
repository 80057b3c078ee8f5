"""Compare rounds, words and simulated wall time of the three strategies.

With a large per-round latency, the single-round scheme wins even though its
workers multiply more; as the latency shrinks the picture changes.

    python demos/cost_model.py
"""

from polylin import ClusterConfig, CodingParams, FLOAT, StragglerModel, generate_problem, predicted_costs
from polylin import run_baseline, run_mrpolylin, run_polylin

N, P, n = 60, 10, 4
sys = generate_problem(N, 0.5, seed=0, backend=FLOAT, n=n)
straggler = StragglerModel("shifted-exponential", shift=0.5, rate=2.0)

for beta1 in (100.0, 1.0, 0.01):
    cfg = dict(beta1=beta1, beta2=0.001, compute_rate=1e-6, straggler=straggler, seed=4)
    runs = {
        "baseline": run_baseline(sys, ClusterConfig(P=P, **cfg)),
        "polylin": run_polylin(sys, CodingParams.create(2, n, P, FLOAT), ClusterConfig(P=P, **cfg)),
        "mrpolylin": run_mrpolylin(sys, CodingParams.create(2, n // 2, P, FLOAT), 2, ClusterConfig(P=P, **cfg)),
    }
    print(f"beta1 = {beta1}")
    for name, res in runs.items():
        led = res.ledger
        print(f"  {name:<10} rounds {led.rounds}  words {led.words_down + led.words_up:>4}  "
              f"worker mults {led.worker_mults:>6}  sim time {led.sim_time:8.3f}")

pred = predicted_costs("polylin", N, P, 7, n, beta1=1.0, beta2=0.01)
print(f"closed form for PolyLin: {pred.rounds} round, {pred.words_down}+{pred.words_up} words, "
      f"{pred.worker_mults} multiplies per worker")
