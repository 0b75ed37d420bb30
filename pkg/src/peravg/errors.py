"""Exception types shared across the package."""


class PeravgError(Exception):
    """Base class for all package errors."""


class StepUnderflow(PeravgError):
    """The adaptive integrator could not find an acceptable step."""

    def __init__(self, t, h):
        self.t = t
        self.h = h
        super().__init__(f"step size underflow at t={t!r} (h={h!r})")


class BlowUp(PeravgError):
    """A trajectory left the configured bounded region."""

    def __init__(self, t, norm, bound):
        self.t = t
        self.norm = norm
        self.bound = bound
        super().__init__(
            f"trajectory blew up at t={t!r}: |y|={norm!r} exceeds {bound!r}"
        )


class DomainError(PeravgError, ValueError):
    """Numeric input outside the domain of a geometric formula."""


class NotSameFiber(PeravgError, ValueError):
    """Two points that were expected to share an S1-orbit do not."""


class NotInvariant(PeravgError, ValueError):
    """A field that must be S1-invariant failed the invariance check."""


class DomainExit(PeravgError):
    """A trajectory left the domain on which the estimates are valid."""


class FirstIntegralViolated(PeravgError, ValueError):
    """The supplied J_O is not a first integral of the reduced averaged field."""


class ConfigError(PeravgError, ValueError):
    """Invalid system configuration. ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
