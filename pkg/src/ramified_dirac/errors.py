"""Exception hierarchy shared by all modules."""


class RamifiedDiracError(Exception):
    """Base class for every error raised by this package."""


class InvalidConfig(RamifiedDiracError, ValueError):
    pass


class DomainError(RamifiedDiracError, ValueError):
    pass


class DegenerateMode(RamifiedDiracError):
    pass


class InternalError(RamifiedDiracError):
    pass


class MeshTooCoarse(RamifiedDiracError, ValueError):
    pass


class NotInDomain(RamifiedDiracError, ValueError):
    pass


class ConvergenceError(RamifiedDiracError):
    pass


class DimensionMismatch(RamifiedDiracError, ValueError):
    pass


class NotLagrangian(RamifiedDiracError, ValueError):
    pass


class ClusterUnresolved(RamifiedDiracError):
    pass


class WindowTooSmall(RamifiedDiracError, ValueError):
    pass


class TailTooLarge(RamifiedDiracError):
    pass


class SolveFailed(RamifiedDiracError):
    pass


class NotEpsInvariant(RamifiedDiracError, ValueError):
    pass


class TailNotTransverse(RamifiedDiracError):
    pass


class FitFailed(RamifiedDiracError):
    pass


class ParseError(RamifiedDiracError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ParseError):
    pass


class TypeMismatch(ParseError):
    pass
