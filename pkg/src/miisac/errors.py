"""Exception hierarchy shared across the package.

All library errors derive from :class:`MiIsacError` so callers (and the
CLI exit-code mapping) can distinguish them from programming errors.
"""


class MiIsacError(Exception):
    """Base class for all errors raised by this package."""


class NonUnitDirection(MiIsacError):
    """Direction vector is not unit-norm within tolerance."""


class NonFiniteGeometry(MiIsacError):
    """Link geometry is non-finite or non-physical (e.g. range <= 0)."""


class NotIdentifiable(MiIsacError):
    """Requested bound or estimate needs a tri-axial link on both ends."""


class ZeroChannel(MiIsacError):
    """Channel estimate has vanishing norm; range inversion undefined."""


class AmbiguousDirection(MiIsacError):
    """Eigengap of the estimated coupling tensor too small to pick the
    radial mode."""


class SingularCurvature(MiIsacError):
    """Gauss-Newton normal equations unsolvable even after regularization."""


class RankDeficientPilots(MiIsacError):
    """Pilot excitations do not span the transmit axes."""


class NoCrossover(MiIsacError):
    """Resolution curves do not cross inside the search bracket."""


class ConfigError(MiIsacError):
    """Invalid experiment configuration (bad key, value, or grid)."""
