from .core import (
    ConfigError,
    DimensionError,
    InstanceError,
    LpInstance,
    OtInstance,
    SdpInstance,
    SolveReport,
    SolverConfig,
    SymMatrix,
)
from .optimizer import NonFiniteStartError, Schedule, solve_continuation, solve_lp, solve_sdp

__all__ = [
    "ConfigError",
    "DimensionError",
    "InstanceError",
    "LpInstance",
    "NonFiniteStartError",
    "OtInstance",
    "Schedule",
    "SdpInstance",
    "SolveReport",
    "SolverConfig",
    "SymMatrix",
    "solve_continuation",
    "solve_lp",
    "solve_sdp",
]
