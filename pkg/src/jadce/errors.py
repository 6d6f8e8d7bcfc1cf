"""Exception types shared across the package."""


class JadceError(Exception):
    """Base class for all package errors."""


class DimensionError(JadceError):
    """An array argument has an incompatible shape or length."""


class ConfigError(JadceError):
    """A configuration value violates its documented bounds."""


class DenseCapError(JadceError):
    """A dense expansion was refused because it would exceed the entry cap."""


class DegenerateProblemError(JadceError):
    """The problem has no meaningful regularization scale (gamma_max = 0)."""


class InstanceFileError(JadceError):
    """An instance file is unreadable, truncated, or malformed."""


class UnsupportedVersionError(InstanceFileError):
    """An instance file declares a format version this build cannot read."""
