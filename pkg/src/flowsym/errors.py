"""Exception hierarchy shared across the package."""


class FlowsymError(Exception):
    """Base class for all errors raised by flowsym."""


class DegenerateBasis(FlowsymError):
    pass


class InvalidPolygon(FlowsymError):
    pass


class SymmetryIncompatible(FlowsymError):
    """A symmetry element does not normalize the lattice, or the generated group is not discrete."""


class ConstraintViolated(SymmetryIncompatible):
    """Template geometry produces a symmetry element incompatible with its translation basis."""


class NonFiniteState(FlowsymError):
    """An integration state left the finite range (|coordinate| > 1e6 or NaN)."""


class ShapeMismatch(FlowsymError):
    pass


class UnsupportedFormat(FlowsymError):
    pass


class EmptyForeground(FlowsymError):
    pass


class OptimizationAborted(FlowsymError):
    """Raised after repeated learning-rate backoff failed to keep the run finite."""
