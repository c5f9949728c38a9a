"""Exact optical Bloch solution for the Demkov pulse with dephasing."""
from .core import (
    BlochVector,
    DemkovSolution,
    ModelParams,
    ReducedParams,
    TimeSeries,
    bloch_from_w,
    final_inversion,
    reduce,
    solve,
    time_series,
    w_full,
    w_infinity,
)
from .oracle import IntegratorConfig, integrate_bloch, oracle_w_infinity
from .resonant import solve_resonant, w_resonant_full
from .specialfn import DEFAULT_POLICY, GhfParams, PrecisionPolicy, ghf_1f2

__all__ = [
    "BlochVector",
    "DEFAULT_POLICY",
    "DemkovSolution",
    "GhfParams",
    "IntegratorConfig",
    "ModelParams",
    "PrecisionPolicy",
    "ReducedParams",
    "TimeSeries",
    "bloch_from_w",
    "final_inversion",
    "ghf_1f2",
    "integrate_bloch",
    "oracle_w_infinity",
    "reduce",
    "solve",
    "solve_resonant",
    "time_series",
    "w_full",
    "w_infinity",
    "w_resonant_full",
]
