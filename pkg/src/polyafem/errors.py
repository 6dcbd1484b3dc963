"""Exception hierarchy shared by all polyafem modules."""


class PolyAFEMError(Exception):
    """Base class for every error raised by this package."""


class MeshError(PolyAFEMError):
    """Invalid mesh geometry or topology."""


class NonConvexElement(MeshError):
    def __init__(self, element):
        super().__init__(f"element {element} is not strictly convex")
        self.element = element


class OrientationError(MeshError):
    def __init__(self, element):
        super().__init__(f"element {element} is not counterclockwise")
        self.element = element


class TwoHangingNodesOnEdge(MeshError):
    def __init__(self, edge):
        super().__init__(f"geometric edge {edge} carries more than one hanging vertex")
        self.edge = edge


class DanglingVertex(MeshError):
    def __init__(self, vertex):
        super().__init__(f"vertex {vertex} is not a corner of any element")
        self.vertex = vertex


class DegenerateCell(MeshError):
    pass


class NonConvexChild(MeshError):
    def __init__(self, element):
        super().__init__(f"refining element {element} produced a non-convex child")
        self.element = element


class PointOutsideElement(PolyAFEMError):
    pass


class VertexCountMismatch(PolyAFEMError):
    pass


class BadEdgeIndex(PolyAFEMError):
    pass


class UnsupportedDegree(PolyAFEMError):
    pass


class UnsupportedCount(PolyAFEMError):
    pass


class SingularElement(PolyAFEMError):
    pass


class QuadratureFailure(PolyAFEMError):
    pass


class NoConvergence(PolyAFEMError):
    def __init__(self, iterations, residual):
        super().__init__(
            f"CG did not converge in {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class BoundaryFacet(PolyAFEMError):
    pass


class AllZeroIndicators(PolyAFEMError):
    pass


class NonPositiveDeterminant(PolyAFEMError):
    def __init__(self, sample, value):
        super().__init__(f"det J_F = {value:.3e} <= 0 at sample {sample}")
        self.sample = sample
        self.value = value


class IoError(PolyAFEMError):
    """File could not be written or parsed."""
