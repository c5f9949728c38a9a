"""Exception hierarchy shared by every module of the package."""


class DemkovError(Exception):
    """Base class for all errors raised by this package."""


class PoleError(DemkovError, ValueError):
    """Argument sits on (or within tolerance of) a pole of the gamma function."""


class DomainError(DemkovError, ValueError):
    """Argument lies outside the region where a method is valid."""


class ConvergenceError(DemkovError, ArithmeticError):
    """A series did not reach its target accuracy within ``max_terms``."""


class DegenerateParameterError(DemkovError, ValueError):
    """Parameters make the three-solution fundamental set linearly dependent."""


class SingularSystemError(DemkovError, ArithmeticError):
    """The matching system for the integration constants is numerically singular."""


class InversionUnavailableError(DemkovError, ArithmeticError):
    """The Bloch rows cannot be inverted for (u, v) and no fallback applies."""


class StepLimitError(DemkovError, RuntimeError):
    """The adaptive integrator exhausted its step budget."""


class ToleranceNotMetError(DemkovError, RuntimeError):
    """The adaptive integrator could not satisfy the requested tolerance."""
