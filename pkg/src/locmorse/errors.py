"""Exception hierarchy shared by all modules."""


class LocMorseError(Exception):
    """Base class for every error raised by the toolkit."""


class BadParameter(LocMorseError, ValueError):
    pass


class SingularPoint(LocMorseError, ValueError):
    pass


class BadCutoff(LocMorseError, ValueError):
    pass


class NotCritical(LocMorseError, ValueError):
    pass


class DegeneratePoint(LocMorseError):
    pass


class DegenerateGenerator(DegeneratePoint):
    pass


class StepUnderflow(LocMorseError, RuntimeError):
    pass


class NotAComplex(LocMorseError):
    pass


class ShapeMismatch(LocMorseError, ValueError):
    pass


class RootCountMismatch(LocMorseError):
    pass


class CensusMismatch(LocMorseError):
    def __init__(self, message, found=None):
        super().__init__(message)
        self.found = found


class ValidationFailure(LocMorseError):
    """A run completed but a structural check failed (exit code 3)."""


class IsolationLost(ValidationFailure):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class LocalityViolation(ValidationFailure):
    pass


class UndecidedBranch(ValidationFailure):
    pass


class Retryable(LocMorseError):
    """Generic-position failure cured by drawing a fresh perturbation (exit code 2)."""


class SaddleSaddleConnection(Retryable):
    pass


class TransversalityFailure(Retryable):
    pass


class GridBudgetExceeded(LocMorseError):
    pass
