"""Exception hierarchy shared by all ltpa modules.

Plain argument problems raise :class:`ValueError`; the classes below cover
failures that callers may want to tell apart (bad files, numerical trouble,
non-converging fits).
"""


class LtpaError(Exception):
    """Base class for package-specific errors."""


class FormatError(LtpaError, ValueError):
    """Malformed signal, model, or measurement file."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ModelConsistencyError(LtpaError, ValueError):
    """Model fields disagree with each other (e.g. theta length vs basis)."""


class NumericalError(LtpaError, ArithmeticError):
    """A linear system was singular or too ill-conditioned to solve."""

    def __init__(self, message, condition=None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3g})"
        super().__init__(message)
        self.condition = condition


class UnsupportedError(LtpaError, NotImplementedError):
    """Operation is not defined for the given filter or basis kind."""


class FitError(LtpaError, RuntimeError):
    """Identification diverged; carries the best model found so far."""

    def __init__(self, message, best_model=None, report=None):
        super().__init__(message)
        self.best_model = best_model
        self.report = report
