"""Exception hierarchy shared by every package in the lab."""


class LabError(Exception):
    """Base class for errors raised by the lab."""


class ContractViolation(LabError, ValueError):
    """A precondition or invariant of an operation does not hold."""


class ProjectionError(LabError, ArithmeticError):
    """The occupancy-measure projection did not reach its tolerance."""


class ConfigError(LabError, ValueError):
    """An experiment configuration is inconsistent."""
