"""Exception hierarchy shared by every module."""


class LindbundleError(Exception):
    """Base class for all package errors."""


class ParameterError(LindbundleError, ValueError):
    """A physical or numerical parameter is outside its valid domain."""


class ContractViolation(LindbundleError, ValueError):
    """An input breaks a structural precondition (Hermiticity, partition, ...)."""


class DegenerateStateError(LindbundleError, ValueError):
    pass


class IntegrationError(LindbundleError, ArithmeticError):
    """Raised when the propagated state stops being finite."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class HermiticityDriftError(LindbundleError, ArithmeticError):
    pass


class AlignmentError(LindbundleError, ValueError):
    """Sequences that must share a time grid do not."""


class InsufficientSampleError(LindbundleError, ValueError):
    pass


class ConfigError(LindbundleError, ValueError):
    """Scenario configuration failed validation.

    ``problems`` is a list of ``(field, message)`` pairs so callers can report
    every offending field at once.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        text = "; ".join(f"{f}: {m}" for f, m in self.problems)
        super().__init__(f"invalid configuration: {text}")
