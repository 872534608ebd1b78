"""Exception hierarchy shared by every module."""


class CartanLabError(ValueError):
    """Base class for all errors raised by the package."""


class DegenerateInputError(CartanLabError):
    """Input has no meaningful answer (empty list, single-map IFS, zero diameter, ...)."""


class ResourceLimitError(CartanLabError):
    """The requested computation exceeds a configured size cap."""


class ResolutionError(CartanLabError):
    """A scale is finer than what the sample cloud can resolve."""


class DimensionMismatchError(CartanLabError):
    """Point dimension does not match the function's ambient space."""


class PreconditionError(CartanLabError):
    """A documented precondition of an operation is violated."""


class DegenerateFunctionError(CartanLabError):
    """The function is identically -inf where a finite value is required."""


class IsolationError(CartanLabError):
    """A probe radius reaches another zero of the map."""


class ConfigError(CartanLabError):
    """Experiment configuration does not validate."""
