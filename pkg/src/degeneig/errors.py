"""Exception hierarchy shared by all modules."""


class DegenError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(DegenError, ValueError):
    pass


class InvalidMesh(DegenError, ValueError):
    pass


class PreconditionViolation(DegenError, ValueError):
    pass


class UndefinedRatio(DegenError, ZeroDivisionError):
    pass


class SpanInsufficient(DegenError):
    """Vector has a significant component outside the computed eigenbasis."""


class ConvergenceFailure(DegenError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NoDomains(DegenError):
    pass


class DomainTooCoarse(DegenError):
    pass


class InvalidSubdomain(DegenError, ValueError):
    pass


class ClusterTrackingFailure(DegenError):
    pass


class SplittingFailure(DegenError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SimplificationFailure(DegenError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(DegenError, ValueError):
    pass


class MissingArtifact(DegenError, FileNotFoundError):
    pass
