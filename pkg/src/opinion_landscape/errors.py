"""Exception hierarchy shared by all modules."""


class LandscapeError(Exception):
    """Base class for errors raised by opinion_landscape."""


class ConfigError(LandscapeError):
    """Malformed graph/potential/energy configuration.

    ``line`` is the 1-based line of the offending JSON text when known.
    """

    def __init__(self, message, line=None, source=None):
        super().__init__(message)
        self.line = line
        self.source = source

    def __str__(self):
        msg = super().__str__()
        if self.source is not None:
            return f"{self.source}:{self.line or 1}: {msg}"
        if self.line is not None:
            return f"line {self.line}: {msg}"
        return msg


class DisconnectedGraph(LandscapeError):
    pass


class UnknownPreset(ConfigError):
    pass


class InvalidParams(ConfigError):
    pass


class GrowthProbeFailed(LandscapeError):
    pass


class EigensolverError(LandscapeError):
    pass


class MaxItersExceeded(LandscapeError):
    pass


class NotBalanced(LandscapeError):
    pass


class EmptyMinimaSet(LandscapeError):
    pass


class MissingBaseline(LandscapeError):
    pass


class InvalidStart(LandscapeError):
    pass


class NoCrossing(LandscapeError):
    pass


class InvalidOrdering(LandscapeError):
    pass
