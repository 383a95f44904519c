"""Multi-sensor attention-fusion sequence learning toolkit.

Per-sensor transformation and attention layers, softmax sensor merging,
bounded random-walk noise training, CTC sequence learning, and grafting
of trained sensor front ends onto independently trained classifiers.
"""

from .errors import (
    ConfigError,
    DataFormatError,
    DimensionError,
    EmptySequenceError,
    FeasibilityError,
    GraftError,
    NumericError,
    SensefuseError,
)
from .rng import Prng

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataFormatError",
    "DimensionError",
    "EmptySequenceError",
    "FeasibilityError",
    "GraftError",
    "NumericError",
    "Prng",
    "SensefuseError",
    "__version__",
]
