"""Exception types shared across the package."""


class VoroderivError(Exception):
    """Base class for package errors."""


class TooFewPointsError(VoroderivError):
    """Fewer points than the dimension allows (need at least dim+1)."""


class DegenerateInputError(VoroderivError):
    """Input cloud is degenerate (all points coplanar/collinear, or NaNs)."""


class SnapshotFormatError(VoroderivError):
    """A snapshot file failed magic/version/shape validation."""


class ConfigError(VoroderivError):
    """An experiment configuration is malformed or incomplete."""


class BandTooNarrowError(ConfigError):
    """Spectral fit band covers fewer than five shells.

    Subclasses ConfigError: the band is set by the caller's grid choice.
    """


class InvariantViolationError(VoroderivError):
    """A runtime numerical invariant failed.

    The first argument names the violated invariant so batch drivers can
    report it verbatim.
    """


class UnstableStepWarning(UserWarning):
    """Integrator step size large enough to destabilise the update."""
