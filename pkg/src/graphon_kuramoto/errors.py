"""Exception types raised across the package."""


class DomainError(ValueError):
    """A coordinate or index lies outside its admissible range."""


class ConstructionError(ValueError):
    """A graph layer cannot be realized with the requested construction."""


class IntegrationError(RuntimeError):
    """The time integrator produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class PicardError(RuntimeError):
    """Picard iteration failed to contract on a time window."""

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


class InfeasibleDesignError(ValueError):
    """Inverse design preconditions are violated."""

    def __init__(self, message, condition=None, witness=None):
        super().__init__(message)
        self.condition = condition
        self.witness = witness


class ConfigError(ValueError):
    """An experiment configuration is malformed."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
