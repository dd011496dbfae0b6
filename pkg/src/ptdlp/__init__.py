"""Parallel-tempered discrete Langevin samplers (PT-DULA / PT-DMALA) with tuning, metrics and exact oracles."""

__version__ = "0.1.0"

from .chain import ChainState, dmala_step, dula_step, run_chain
from .energy import (
    FunctionModel,
    GridMixtureModel,
    ItemSumModel,
    LogQuadraticModel,
    MiniBatchEnergy,
    MixtureComponent,
    RbmModel,
)
from .proposal import ChainParams, coordinate_weights, log_q, propose
from .space import DiscreteSpace, enumerate_states
from .tempering import (
    ReplicaEnsemble,
    ensemble_step,
    round_trip_stats,
    stochastic_swap_probability,
    swap_probability,
)
from .tuning import (
    BarrierCurve,
    estimate_barrier,
    optimal_chain_count,
    optimal_copies,
    pchip_eval,
    round_trip_rate,
    solve_schedule,
    tune,
)

__all__ = [
    "BarrierCurve", "ChainParams", "ChainState", "DiscreteSpace", "FunctionModel", "GridMixtureModel",
    "ItemSumModel", "LogQuadraticModel", "MiniBatchEnergy", "MixtureComponent", "RbmModel", "ReplicaEnsemble",
    "coordinate_weights", "dmala_step", "dula_step", "ensemble_step", "enumerate_states", "estimate_barrier",
    "log_q", "optimal_chain_count", "optimal_copies", "pchip_eval", "propose", "round_trip_rate",
    "round_trip_stats", "run_chain", "solve_schedule", "stochastic_swap_probability", "swap_probability", "tune",
]
