"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid measure, mapping or budget parameters."""


class UnsupportedPairError(ValueError):
    """Two measures cannot be compared by the requested operation."""


class DomainError(ValueError):
    """A point lies outside the input space of a mapping or classifier."""


class CapabilityError(ValueError):
    """The requested evaluation mode is not available for this object."""
