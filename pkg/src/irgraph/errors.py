class IRGraphError(Exception):
    """Base class for errors raised by irgraph."""


class InvalidMeasureError(IRGraphError, ValueError):
    pass


class InvalidGridError(IRGraphError, ValueError):
    pass


class ModeMismatchError(IRGraphError, ValueError):
    pass


class KernelDomainError(IRGraphError, ValueError):
    pass


class UnboundedApproximationError(IRGraphError, ValueError):
    pass


class SizeCapError(IRGraphError):
    pass


class EnumerationCapError(IRGraphError):
    pass


class IterationLimitError(IRGraphError):
    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class ConsistencyError(IRGraphError):
    pass


class InvalidEigenfunctionError(IRGraphError):
    pass


class InsufficientDataError(IRGraphError):
    pass


class NonIntegrableError(IRGraphError, ValueError):
    pass
