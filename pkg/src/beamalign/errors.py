"""Exception types shared across the package."""


class BeamAlignError(Exception):
    """Base class for all beamalign errors."""


class ConfigError(BeamAlignError, ValueError):
    """Invalid or inconsistent configuration values."""


class DimensionError(BeamAlignError, ValueError):
    """Vector or matrix shapes do not match."""


class EpisodeError(BeamAlignError, RuntimeError):
    """Environment episode protocol violated (e.g. stepping a finished episode)."""
