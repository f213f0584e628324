"""Exception types shared across the package."""


class LimabsError(Exception):
    """Base class for all package errors."""


class BadParameters(LimabsError):
    pass


class ObstacleTooLarge(BadParameters):
    pass


class DomainDisconnected(LimabsError):
    pass


class DimensionMismatch(LimabsError):
    pass


class ShellOutsideDomain(LimabsError):
    pass


class UnlabeledFace(LimabsError):
    pass


class InconsistentLabeling(LimabsError):
    pass


class NotSymmetric(LimabsError):
    pass


class NotPositiveDefinite(LimabsError):
    pass


class DecayViolated(LimabsError):
    pass


class SolverStagnation(LimabsError):
    pass


class SingularAtRealFrequency(LimabsError):
    pass


class ConvergenceFailure(LimabsError):
    pass


class NotConverged(LimabsError):
    pass


class PoissonSolveFailure(LimabsError):
    pass


class SupportViolation(LimabsError):
    pass


class OmegaZero(BadParameters):
    pass


class ResonantDenominator(LimabsError):
    pass


class InsufficientShells(BadParameters):
    pass


class TruncationInsufficient(LimabsError):
    pass


class OracleInvalid(LimabsError):
    """An analytic reference failed its own self-validation."""


class ConfigError(LimabsError):
    """Invalid run configuration; message names the failing section."""
