"""Exception types raised across the package."""


class SalnavError(Exception):
    """Base class for all package errors."""


class DomainError(SalnavError):
    """A well-formed request that the model cannot satisfy (CLI exit code 2)."""


# scene model
class EmptyScene(SalnavError):
    pass


class DegenerateScene(SalnavError):
    pass


class EmptyGraph(SalnavError):
    pass


class DegenerateCentroid(SalnavError):
    pass


# topological map
class DisconnectedMap(SalnavError):
    pass


class UnsupportedVersion(SalnavError):
    pass


class CorruptMap(SalnavError):
    pass


# localization / positioning
class NoCandidates(DomainError):
    pass


class InsufficientCorrespondences(DomainError):
    pass


class DegenerateDirection(SalnavError):
    pass


class ZeroWeight(SalnavError):
    pass


class UnderdeterminedRotation(SalnavError):
    pass


# navigation
class InvalidHop(SalnavError):
    pass


class NavigationFailed(DomainError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


# synthetic world
class InfeasibleWorld(SalnavError):
    pass


class InvalidPose(SalnavError):
    pass


# evaluation
class UnknownExperiment(SalnavError):
    pass
