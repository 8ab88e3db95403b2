"""
Exception hierarchy for the collapse lab.

Every error carries the process exit code the CLI reports for it:
2 = usage, 3 = domain/precondition, 4 = io. An interrupted run exits 130.
"""

from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4
EXIT_INTERRUPTED = 130


class CollapseLabError(Exception):
    exit_code = EXIT_DOMAIN


class UsageError(CollapseLabError):
    exit_code = EXIT_USAGE


class DomainError(CollapseLabError):
    pass


class CapacityError(DomainError):
    pass


class IndexOutOfRangeError(DomainError):
    pass


class BasisTagError(DomainError):
    pass


class SupportMismatchError(DomainError):
    pass


class SequencingError(DomainError):
    pass


class StepBudgetExceededError(DomainError):
    def __init__(self, message: str, steps: int, last_mass: float):
        super().__init__(message)
        self.steps = steps
        self.last_mass = last_mass


class DegenerateDecompositionError(DomainError):
    """Raised when one side of a branch decomposition carries no mass.

    The collapse engine reads this as the absorption condition; the
    offending decomposition is attached so callers can see which side won.
    """

    def __init__(self, message: str, decomposition: Optional[object] = None):
        super().__init__(message)
        self.decomposition = decomposition


class ResultsIOError(CollapseLabError):
    exit_code = EXIT_IO
