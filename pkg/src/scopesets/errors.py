"""Exception types shared across the package."""


class ScopeSetsError(ValueError):
    """Base class for all library errors."""


class ParameterError(ScopeSetsError):
    """A numeric argument is outside its admissible range."""


class DomainMismatchError(ScopeSetsError):
    """Fields or index sets do not live on the same domain."""


class ThresholdOrderError(ScopeSetsError):
    """A lower threshold exceeds an upper threshold somewhere."""


class DegenerateDataError(ScopeSetsError):
    """Data has no usable variation (e.g. a zero-variance column)."""


class SingularDesignError(ScopeSetsError):
    """A design matrix is rank deficient."""


class InfeasibleSliceError(ScopeSetsError):
    """The requested sphere slice is empty (|l| > ||a||)."""
