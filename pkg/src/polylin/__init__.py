"""Coded distributed iterative linear-inverse solvers on a simulated cluster."""

from .bench import ExperimentConfig, emit_report, generate_problem, run_experiment
from .coding import (
    CodingParams,
    DecodeError,
    EtaEval,
    ShardBundle,
    decode,
    eta_direct,
    lagrange_coefficient_weights,
    make_shard,
    make_shards,
    recovery_threshold,
    worker_eta,
)
from .linalg import EXACT, FLOAT, OpCounter, split_horizontal, split_vertical, to_backend, zero_pad
from .sim import (
    ClusterConfig,
    CostLedger,
    RunResult,
    StragglerModel,
    predicted_costs,
    run_baseline,
    run_mrpolylin,
    run_polylin,
    simulate_round,
)
from .solver import (
    ErrorBoundInputs,
    IterationSystem,
    error_norm,
    fixed_point,
    gd_cast,
    iterate,
    jacobi_cast,
    required_iterations,
)
from .symbolic import symbolic_eta

__version__ = "0.1.0"
