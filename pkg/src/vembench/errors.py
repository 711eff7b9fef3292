"""Exception types shared across the package."""


class VemError(Exception):
    """Base class for all package errors."""


class DegenerateElement(VemError):
    """Element with (numerically) vanishing measure."""


class NonPlanarFace(VemError):
    """A polyhedron face whose vertex loop is not planar within tolerance."""


class ParseError(VemError):
    """Malformed mesh file; message carries line/field context."""


class TopologyError(VemError):
    """Mesh connectivity violates conformity invariants."""


class SpecError(VemError):
    """Invalid generator or experiment parameters."""


class NumericalBreakdown(VemError):
    """Orthogonalization pivot collapsed below tolerance."""


class SingularMassMatrix(VemError):
    """Second-moment matrix numerically singular even after rescaling."""


class SingularG(VemError):
    """Projector system matrix is rank deficient."""


class SingularSystem(VemError):
    """Global linear system could not be factorized."""


class UnknownProblem(VemError):
    """Requested manufactured problem id does not exist."""
