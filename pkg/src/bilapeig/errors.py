"""Exception types shared across the package."""


class BilapError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BilapError, ValueError):
    """Argument outside the domain of a function (e.g. nonpositive Bessel argument)."""


class RangeError(BilapError, OverflowError):
    """Result not representable in double precision; use the scaled variant."""


class ConstructionError(BilapError, ValueError):
    """A model object violates its construction invariants."""


class IntegrationError(BilapError, RuntimeError):
    """The ODE integrator failed (step-size collapse or non-finite state)."""


class EigenvalueNotFound(BilapError, RuntimeError):
    """No matching-defect minimum below threshold inside the bracket."""


class SimplicityError(BilapError, RuntimeError):
    """A mode has (numerically) zero matching margin; the annihilator is ill-defined."""


class ConfigError(BilapError, ValueError):
    """Invalid or incomplete run configuration."""
