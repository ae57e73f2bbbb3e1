"""Exception types shared across the package."""


class DualvolError(Exception):
    """Base class for all package-specific errors."""


class ParseError(DualvolError):
    """Malformed input file (mesh or matrix)."""


class DegenerateError(DualvolError):
    """Geometric degeneracy: zero-volume tet, collinear triangle, ill-conditioned system."""


class NonManifoldError(DualvolError):
    """A triangle face is shared by more than two tetrahedra."""


class ConvergenceError(DualvolError):
    """An iterative or dense solver failed to converge."""


class PositivityError(DualvolError):
    """A mass matrix entry required to be positive is not."""


class NotSpdError(DualvolError):
    """A matrix required to be symmetric positive definite is not."""


class OptimizationError(DualvolError):
    """The center optimization did not reach the requested tolerance."""
