"""Exception hierarchy shared across the package.

CLI exit codes are derived from these classes; keep the mapping in
``cli.EXIT_CODES`` in sync when adding a category.
"""


class SensefuseError(Exception):
    """Base class for all package errors."""


class ConfigError(SensefuseError):
    """Invalid configuration value or inconsistent model/corpus spec."""


class DimensionError(SensefuseError):
    """Array shape or sequence-length mismatch between inputs."""


class EmptySequenceError(DimensionError):
    """Zero-length sequence or empty evaluation set where data is required."""


class DataFormatError(SensefuseError):
    """Malformed container, manifest, or checkpoint file."""


class FeasibilityError(SensefuseError):
    """Label sequence cannot be aligned to the frame sequence."""


class NumericError(SensefuseError):
    """NaN/Inf detected where finite values are required."""


class GraftError(ConfigError):
    """Incompatible checkpoint pair passed to graft."""
