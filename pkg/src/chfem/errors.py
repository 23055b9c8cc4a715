"""Exception types shared across the package."""


class ChfemError(Exception):
    """Base class for all package errors."""


class DegenerateTet(ChfemError):
    """A tetrahedron has (numerically) zero volume."""


class DanglingIndex(ChfemError):
    """A cell refers to a vertex index that does not exist."""


class NonManifoldFace(ChfemError):
    """A face is shared by more than two tetrahedra."""


class InsufficientQuadratureDegree(ChfemError):
    """Requested integration needs a higher-degree quadrature rule."""


class ShapeMismatch(ChfemError):
    """An operator was applied to a field with incompatible value shape."""


class DimensionMismatch(ChfemError):
    """A constructed subspace does not have the expected dimension.

    This is the failure signal of the verification harness: it means a
    constraint list (or a dimension formula) does not hold numerically.
    """


class UnisolvencyFailure(ChfemError):
    """A DOF matrix is (numerically) singular."""


class ExactnessFailure(ChfemError):
    """A complex failed a rank/exactness check."""


class FrameInconsistency(ChfemError):
    """A shared DOF evaluated differently from two adjacent tets."""


class SubcomplexViolation(ChfemError):
    """An operator image failed to lie in the declared codomain space."""


class SingularSystem(ChfemError):
    """A linear system that should be nonsingular failed to factorize."""


class SolverDivergence(ChfemError):
    """The iterative fallback solver did not converge."""
