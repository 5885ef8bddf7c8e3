"""Exception types shared across the toolkit."""


class AeclabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AeclabError, ValueError):
    """Invalid configuration or precondition violation."""


class DataError(AeclabError, ValueError):
    """Malformed or inconsistent data (files, signals, spectra)."""
