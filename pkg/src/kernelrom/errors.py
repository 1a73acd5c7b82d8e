"""Exception types shared across the package."""


class KernelRomError(Exception):
    """Base class for all kernelrom errors."""


class InvalidGridError(KernelRomError):
    """Grid construction parameters are unusable (e.g. fewer than 2 points per axis)."""


class InvalidParameterError(KernelRomError):
    """A scalar parameter is out of its admissible range."""


class NumericError(KernelRomError):
    """A numerical operation produced non-finite values or failed to factorize."""


class IllConditionedSubmatrixError(NumericError):
    """A per-column submatrix solve failed during sparse factorization."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"submatrix factorization failed in column {column}")


class SingularFactorError(NumericError):
    """A triangular factor has a zero diagonal and cannot be inverted."""


class StencilError(KernelRomError):
    """A finite-difference stencil cannot be built (missing neighbors)."""


class IllConditionedConstraintsError(NumericError):
    """The inner Gauss-Newton system could not be factorized."""


class DivergenceError(NumericError):
    """Gauss-Newton residual kept growing after exhausting step halvings."""

    def __init__(self, message, iterates=None, trajectory=None):
        super().__init__(message)
        self.iterates = list(iterates) if iterates is not None else []
        self.trajectory = trajectory


class NonconvergenceError(NumericError):
    """A Newton reference solve stagnated before reaching tolerance."""


class BlowUpError(NumericError):
    """An explicit time march produced NaN/Inf values."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DomainError(KernelRomError):
    """A query point lies outside the grid's domain bounds."""


class LibraryGenerationError(KernelRomError):
    """A snapshot solve failed while building a library."""


class UnsupportedAugmentationError(KernelRomError):
    """Augmentation requested on a library that does not support it."""


class FormatError(KernelRomError):
    """A persisted file is malformed."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class ConfigError(KernelRomError):
    """An experiment configuration is invalid."""
