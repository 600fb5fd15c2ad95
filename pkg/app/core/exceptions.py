from typing import Any, Optional


class GroupCodeError(Exception):
    """Base class for every domain error raised by the package."""


class InvalidInputError(GroupCodeError):
    """Rank or size mismatch, bad index, non-prime modulus, parameter out of range."""


class BudgetExceededError(GroupCodeError):
    def __init__(self, message: str, budget: int, required: int):
        super().__init__(message)
        self.budget = budget
        self.required = required


class CertificationError(GroupCodeError):
    """
    Raised when a resampling loop runs out of attempts.

    The best attempt seen so far is kept so callers can still report it.
    """

    def __init__(self, message: str, best_attempt: Optional[Any] = None, best_value: Optional[Any] = None):
        super().__init__(message)
        self.best_attempt = best_attempt
        self.best_value = best_value


class HomomorphismError(GroupCodeError):
    """Generator images do not extend to a homomorphism."""


class NotSolvableError(GroupCodeError):
    pass
