"""Exception and warning types raised across the package."""


class NitscheError(Exception):
    """Base class for all package errors."""


# geometry
class DegenerateShape(NitscheError, ValueError):
    pass


class BufferEscapesDomain(NitscheError, ValueError):
    pass


# mesh
class MeshingFailed(NitscheError):
    pass


class NestingViolated(NitscheError, ValueError):
    pass


class NoInterfaceElements(NitscheError):
    pass


# transition
class RingVertexOffBoundary(NitscheError, ValueError):
    pass


# coefficients
class NonCoercive(NitscheError, ValueError):
    pass


# interface
class UntaggedBoundary(NitscheError):
    pass


class CoverageGap(NitscheError):
    pass


# fem
class QuadratureOrderTooLow(NitscheError, ValueError):
    pass


class PointOutsideMesh(NitscheError, ValueError):
    pass


# nitsche
class BadBounds(NitscheError, ValueError):
    pass


class NonzeroRhoOnInterface(NitscheError):
    pass


# solver
class NotConverged(NitscheError):
    """Raised when CG stops without reaching the tolerance.

    The best iterate and the solve report are attached as ``x`` and ``report``.
    """

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class SolverBreakdown(NotConverged):
    """CG hit a non-positive curvature direction (matrix not SPD)."""


class CellSolveFailed(NitscheError):
    pass


# postproc
class EmptyRegion(NitscheError, ValueError):
    pass


# warnings
class PenaltyBelowBound(UserWarning):
    pass


class UnderResolved(UserWarning):
    pass


class AssumptionViolated(UserWarning):
    pass
