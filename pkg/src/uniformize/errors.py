"""Exception hierarchy shared by all modules."""


class UniformizeError(Exception):
    """Base class for every error raised by this package."""


class MeshError(UniformizeError):
    """Malformed network or complex (bad ids, non-simple cycles, ...)."""


class ConductanceError(UniformizeError):
    """A conductance that is negative, non-finite, or zero where it must not be."""


class SolverError(UniformizeError):
    """The linear system is singular, underdetermined, or failed a post-solve check."""


class TieError(UniformizeError):
    """Adjacent vertices share a field value where the construction forbids it.

    ``edges`` lists the offending vertex pairs.
    """

    def __init__(self, message, edges=()):
        super().__init__(message)
        self.edges = [tuple(e) for e in edges]


class LevelError(UniformizeError):
    """A level curve could not be traced or has the wrong topology."""


class VerificationError(UniformizeError):
    """A runtime-verified invariant failed beyond tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
