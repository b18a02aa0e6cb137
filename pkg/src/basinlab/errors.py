"""Exception types shared across basinlab."""

from __future__ import annotations


class BasinlabError(Exception):
    pass


class ConstructionError(BasinlabError):
    """A map, preset or flow failed a construction-time hypothesis check."""

    def __init__(self, message: str, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class ConvergenceError(BasinlabError):
    """An iterative solver stopped without reaching its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class ConfigError(BasinlabError):
    """A run configuration failed validation; ``errors`` lists every problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class InconclusiveError(BasinlabError):
    pass
