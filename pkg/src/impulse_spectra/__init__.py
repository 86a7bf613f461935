"""Spectral analysis of a second-order difference operator on Z \\ {0, 1}
with impulsive junction conditions across the puncture."""

from __future__ import annotations

from .errors import (
    ConfigError,
    DecayViolation,
    EigenSolverError,
    FundamentalSystemDegenerate,
    ImpulseSpectraError,
    InvariantBreach,
    LatticeIndexError,
    NotASolution,
    PotentialBoundError,
    WindowError,
    WindowTooSmall,
)
from .lattice import ComplexSeq, ImpulseParams, LatticeWindow, PotentialSpec, Weights

__version__ = "0.1.0"

__all__ = [
    "ComplexSeq",
    "ImpulseParams",
    "LatticeWindow",
    "PotentialSpec",
    "Weights",
    "ConfigError",
    "DecayViolation",
    "EigenSolverError",
    "FundamentalSystemDegenerate",
    "ImpulseSpectraError",
    "InvariantBreach",
    "LatticeIndexError",
    "NotASolution",
    "PotentialBoundError",
    "WindowError",
    "WindowTooSmall",
    "__version__",
]
