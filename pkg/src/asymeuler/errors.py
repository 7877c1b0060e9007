"""Exception types raised by the library."""


class AsymError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(AsymError, ValueError):
    pass


class UnsupportedDimension(AsymError, ValueError):
    pass


class ResonantComponent(AsymError, ValueError):
    """Input has a nonzero component in the kernel of a shifted sphere Laplacian."""


class MalformedSource(AsymError, ValueError):
    """Source expansion has grades outside the admissible window."""


class NotTwoDimensional(AsymError, ValueError):
    pass


class UnresolvedSupport(AsymError, RuntimeError):
    """Quadrature grid too coarse for the sampled field."""


class NotDivergenceFree(AsymError, ValueError):
    pass


class StencilOutOfDomain(AsymError, ValueError):
    pass


class StepUnstable(AsymError, RuntimeError):
    pass


class OrientationError(AsymError, ValueError):
    """Displacement field does not define an orientation preserving map."""
