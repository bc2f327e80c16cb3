"""Exception types raised by the library."""


class AbrfError(Exception):
    """Base class for all library errors."""


class DatasetError(AbrfError):
    """Invalid or unreadable dataset."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(AbrfError):
    """Invalid experiment, forest or model configuration."""


class SchemaMismatchError(AbrfError):
    """Input data does not match the schema stored in a model file."""


class MetricError(AbrfError):
    """A measure is undefined for the given inputs."""


class SolverError(AbrfError):
    """A weight solver failed (non-finite objective, pivot limit, ...)."""


class InfeasibleError(SolverError):
    """Linear program has no feasible point."""


class UnboundedError(SolverError):
    """Linear program objective is unbounded below."""


class DivergenceError(SolverError):
    """Gradient training produced a non-finite loss."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
