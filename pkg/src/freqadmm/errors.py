"""Exception types shared across the package."""


class FreqAdmmError(Exception):
    """Base class for all package errors."""


class SolverError(FreqAdmmError):
    """An internal scalar search or bisection failed to converge."""


class InfeasibleError(FreqAdmmError):
    """The balance constant lies outside ``[sum(a), sum(b)]``."""


class NotStronglyConvexError(FreqAdmmError):
    """A disutility has zero strong-convexity modulus."""


class UnsupportedDisutilityError(FreqAdmmError):
    """An algorithm was given a disutility it cannot handle."""


class AssumptionViolationError(FreqAdmmError):
    """Agents' dual variables disagree where a common dual is required."""


class InvariantViolationError(FreqAdmmError):
    """A convergence certificate failed during a run where it must hold."""


class ConfigError(FreqAdmmError, ValueError):
    """Invalid scenario configuration or model parameters."""
