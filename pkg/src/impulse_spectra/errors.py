"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ImpulseSpectraError(Exception):
    """Base class for every error raised by this package."""


class LatticeIndexError(ImpulseSpectraError, IndexError):
    """Access outside the stored index range of a sequence or window."""


class WindowError(ImpulseSpectraError, ValueError):
    """Window too small or inconsistent with the requested operation."""


class PotentialBoundError(ImpulseSpectraError, ValueError):
    """Potential violates q_n >= c > 0 on the queried sites."""


class FundamentalSystemDegenerate(ImpulseSpectraError, ArithmeticError):
    """Two solutions have a vanishing Wronskian where one is needed."""


class WindowTooSmall(ImpulseSpectraError, RuntimeError):
    """Weyl disks have not shrunk below the requested tolerance."""

    def __init__(self, message: str, required_b: int | None = None, required_a: int | None = None):
        super().__init__(message)
        self.required_b = required_b
        self.required_a = required_a


class DecayViolation(ImpulseSpectraError, ValueError):
    """Sequences do not vanish at the window edge."""


class NotASolution(ImpulseSpectraError, ValueError):
    """A sequence fails the difference equation it is claimed to solve."""

    def __init__(self, message: str, worst_site: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.worst_site = worst_site
        self.residual = residual


class InvariantBreach(ImpulseSpectraError, RuntimeError):
    """An internal postcondition failed; indicates a numerical or logic defect."""


class EigenSolverError(ImpulseSpectraError, RuntimeError):
    """Dense eigensolver failed or produced an unacceptable residual."""


class ConfigError(ImpulseSpectraError, ValueError):
    """Configuration could not be parsed or validated."""
