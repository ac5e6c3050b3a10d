"""Shared exception types."""


class ConfigError(ValueError):
    """A layer shape, tiling config, or run config violates an invariant."""


class CorruptionError(ValueError):
    """An encoded stream or file cannot be decoded consistently."""
