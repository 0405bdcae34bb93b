"""Exception types raised by the geometry, solver and model layers."""


class CRGeometryError(Exception):
    """Base class for all package errors."""


class SingularFrame(CRGeometryError):
    pass


class DegenerateContact(CRGeometryError):
    pass


class NonFiniteField(CRGeometryError):
    pass


class UnderdeterminedSystem(CRGeometryError):
    pass


class StencilOutOfDomain(CRGeometryError):
    pass


class NotPositiveDefinite(CRGeometryError):
    pass


class NonPositiveDensity(CRGeometryError):
    pass


class MapOutOfDomain(CRGeometryError):
    pass


class NonPositiveDilation(CRGeometryError):
    pass


class IncompatibleLattice(CRGeometryError):
    pass


class CapExclusion(CRGeometryError):
    pass


class PseudoconvexityLost(CRGeometryError):
    def __init__(self, k, message=None):
        self.k = k
        super().__init__(message or f"Levi form not positive definite for family member {k}")


class UnsupportedManifold(CRGeometryError):
    pass


class StencilNotAssembled(CRGeometryError):
    pass


class NonConvergence(CRGeometryError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class PositivityLoss(CRGeometryError):
    pass


class IndefiniteOperator(CRGeometryError):
    pass


class OrderTooHigh(CRGeometryError):
    pass
