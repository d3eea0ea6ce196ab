"""Exception hierarchy shared by all modules."""


class AmcQueueError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(AmcQueueError, ValueError):
    """Inputs have the wrong shape or refer to things that do not exist."""


class IrreducibilityError(AmcQueueError):
    """A Markov chain does not have a unique stationary distribution."""

    def __init__(self, message, states=()):
        super().__init__(message)
        self.states = tuple(states)


class TruncationError(AmcQueueError):
    """The arrival truncation bound would exceed its hard cap."""


class ConstructionError(AmcQueueError):
    """A transition matrix row failed the stochasticity check."""

    def __init__(self, message, row=None, deficit=None):
        super().__init__(message)
        self.row = row
        self.deficit = deficit


class NonConvergenceError(AmcQueueError):
    """Iterative stationary solve hit its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConsistencyError(AmcQueueError):
    """A computed metric violates a bound that holds for any valid model."""


class UndefinedDelayError(AmcQueueError):
    """Mean delay requested with zero throughput and a nonempty queue."""


class ConfigError(AmcQueueError):
    """Configuration file could not be parsed or failed validation."""

    def __init__(self, message, field=None, line=None, column=None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column
