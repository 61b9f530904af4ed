"""Sparse mean-reverting portfolio selection.

Two-stage solver for minimum-predictability portfolios with a volatility
floor and a hard sparsity cap: a penalty decomposition stage run by block
coordinate descent, then greedy support improvement driven by globally
solved restricted subproblems. Ships with VAR(1)-based matrix estimation,
a band-trading backtest, and a command-line front end.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConvergenceFailure,
    DegenerateFace,
    DualUnbounded,
    EstimationError,
    Infeasible,
    IngestError,
    InsufficientData,
    InvalidIndexSet,
    InvalidInput,
    InvalidMatrix,
    InvalidPrice,
    MeanRevError,
    NoVolatility,
    NotPositiveDefinite,
    ZeroVector,
)
from .model import (
    KktCertificate,
    PortfolioSolution,
    ProblemInstance,
    kkt_residual,
    robinson_check,
    support_feasible,
)

__all__ = [
    "ConvergenceFailure",
    "DegenerateFace",
    "DualUnbounded",
    "EstimationError",
    "Infeasible",
    "IngestError",
    "InsufficientData",
    "InvalidIndexSet",
    "InvalidInput",
    "InvalidMatrix",
    "InvalidPrice",
    "KktCertificate",
    "MeanRevError",
    "NoVolatility",
    "NotPositiveDefinite",
    "PortfolioSolution",
    "ProblemInstance",
    "ZeroVector",
    "kkt_residual",
    "robinson_check",
    "support_feasible",
    "__version__",
]
