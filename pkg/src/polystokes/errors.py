"""Exception types raised across the package."""


class PolystokesError(Exception):
    pass


class ParseError(PolystokesError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TopologyError(PolystokesError):
    pass


class NotStarShaped(PolystokesError):
    pass


class UnsupportedDegree(PolystokesError):
    pass


class RankError(PolystokesError):
    pass


class SingularLocalSystem(PolystokesError):
    pass


class OrderTooHigh(PolystokesError):
    pass


class InfeasibleConstraints(PolystokesError):
    pass


class AssemblyError(PolystokesError):
    pass


class SolverFailure(PolystokesError):
    pass
