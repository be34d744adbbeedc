"""Exception hierarchy shared by all numerical modules."""


class AgplzError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class PoleError(AgplzError):
    """Evaluation too close to a pole of the gauge-potential term (1 + tau^2 = 0)."""


class DegeneracyError(AgplzError):
    """Eigenvalues (nearly) coincide, so eigenvectors are not defined."""


class ContinuationError(AgplzError):
    """Nearest-eigenvalue branch matching is ambiguous."""


class StepSizeUnderflow(AgplzError):
    """Adaptive integrator needed a step below its relative floor."""


class QuadratureNonConvergence(AgplzError):
    """Adaptive quadrature hit its subdivision limit before the tolerance."""


class PathThroughCutError(AgplzError):
    """A contour crosses a registered branch cut."""


class PathError(AgplzError):
    """A contour vertex sits inside the exclusion radius of a singularity."""


class RadiusError(AgplzError):
    """Holonomy loop radius is invalid or touches another singularity."""


class ParameterCollisionError(AgplzError):
    """Two Gaudin site parameters coincide."""
