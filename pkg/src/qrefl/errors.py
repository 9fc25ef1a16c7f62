"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures onto a stable set of process exit statuses.
"""


class QReflError(Exception):
    exit_code = 1


class ConfigError(QReflError, ValueError):
    exit_code = 2


class DataError(QReflError, ValueError):
    exit_code = 3


class ConvergenceError(QReflError, RuntimeError):
    """Numerical procedure failed to converge.

    ``diagnostics`` holds whatever partial state is useful for a bug report
    (steps taken, position reached, best-so-far estimate, ...).
    """

    exit_code = 4

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class DomainError(QReflError, ValueError):
    """Input outside the physical or mathematical domain of an operation."""

    exit_code = 5


class UnsupportedExponentError(DomainError):
    pass


class NoSolutionError(DomainError):
    pass


class BoundaryPlacementError(DomainError):
    pass


class UnitarityError(DomainError):
    pass


class UnsupportedRegimeError(DomainError):
    pass


class InsufficientDataError(DataError):
    pass


class NoPowerLawError(DataError):
    pass


class OverflowGuardError(DomainError):
    pass
