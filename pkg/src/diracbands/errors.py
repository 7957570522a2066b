"""Exception hierarchy shared by all diracbands modules."""


class DiracBandsError(Exception):
    """Base class for every error raised by this package."""


class DegenerateBasisError(DiracBandsError, ValueError):
    """Raised when two lattice vectors are (numerically) collinear."""


class EmptyBasisError(DiracBandsError, ValueError):
    """Raised when a plane-wave cutoff would select no reciprocal vectors."""


class LatticeMismatchError(DiracBandsError, ValueError):
    """Raised when a potential and a basis live on different lattices."""


class NonFiniteSampleError(DiracBandsError, ValueError):
    """Raised when a real-space grid contains NaN or infinite values."""


class ConvergenceError(DiracBandsError, ArithmeticError):
    """Raised when an eigensolve does not reach the residual bound.

    The achieved residual is kept on the instance so callers can report it.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)


class EmptySectorError(DiracBandsError, ValueError):
    """Raised when a symmetry sector has no columns in the current basis."""


class DegenerateSectorError(DiracBandsError, ArithmeticError):
    """Raised when a targeted sector eigenvalue is not simple in its sector."""

    def __init__(self, message, gap):
        super().__init__(message)
        self.gap = float(gap)


class PerturbationClassError(DiracBandsError, ValueError):
    """Raised when a perturbation is not real, even and R-invariant."""


class NonConicalDataError(DiracBandsError, ArithmeticError):
    """Raised when band data along a ray does not look like a cone."""


class ToleranceError(DiracBandsError, ValueError):
    """Raised when a clustering tolerance is not below the separation tolerance."""


class ClusterIdentificationError(DiracBandsError, ArithmeticError):
    """Raised when the quartet/doublet split cannot be resolved."""


class SymmetryViolationError(DiracBandsError, ArithmeticError):
    """Raised when a quantity that symmetry forces to be real is not."""
