"""Exception hierarchy shared across the package."""


class PolyEitError(Exception):
    """Base class for all package errors."""


class GeometryError(PolyEitError):
    """Structurally invalid geometry (non-simple polygon, bad orientation, ...).

    Distinct from admissibility failures, which are reported, not raised.
    """


class MatchImpossible(PolyEitError):
    """Vertex matching requested for polygons with different vertex counts."""


class DeformationError(PolyEitError):
    """Offset/support construction for a deformation field failed."""


class FlowDegenerate(PolyEitError):
    """A deformation flow produced a non-simple polygon or inverted elements."""


class MeshQualityError(PolyEitError):
    """Mesh generation could not reach the requested quality/size bounds."""


class MeshIntegrityError(PolyEitError):
    """Mesh connectivity is inconsistent (missing neighbor, bad tags, ...)."""


class SolverError(PolyEitError):
    """Linear solve failed or violated a solution sanity check."""


class JacobianSingular(PolyEitError):
    """I + t h' is singular at the requested evaluation point."""


class DegeneratePath(PolyEitError):
    """Perturbation path with no shape and no conductivity change."""


class SamplingError(PolyEitError):
    """Rejection sampling of admissible instances exhausted its retry budget."""


class ResolutionError(PolyEitError):
    """Requested measurement is below the resolution of the current mesh."""


class UnsupportedConfiguration(PolyEitError):
    """Configuration outside the implemented scope (e.g. source inside the inclusion)."""


class ConfigError(PolyEitError):
    """Run configuration file is missing, malformed, or inconsistent."""
