"""Exception types shared across the package."""


class NbtvError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(NbtvError, ValueError):
    """Array dimensions are inconsistent with what an operation requires."""


class DomainError(NbtvError, ValueError):
    """Input values violate a mathematical precondition (e.g. negativity)."""


class DegenerateInputError(NbtvError, ValueError):
    """Input is structurally valid but degenerate (e.g. zero-norm truth)."""


class DegenerateStepError(NbtvError, ValueError):
    """An iterate difference is exactly zero; the caller should treat the
    iteration as converged."""


class CapacityError(NbtvError, ValueError):
    """Problem size exceeds a documented test-scale cap."""


class ParseError(NbtvError, ValueError):
    """A file could not be parsed; the message carries the position."""


class ConfigError(NbtvError, ValueError):
    """A configuration file or key is invalid."""
