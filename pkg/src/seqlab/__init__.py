"""Numerical laboratory for global-null testing in the Gaussian sequence model.

Implements p-norm and Higher-Criticism tests with exact and Monte-Carlo
calibration, the exact power curve of the Euclidean-norm test, p-ball
geometry with uniform sampling, and experiments measuring how small the
region where any test can beat the Euclidean-norm test's power really is.
"""

__version__ = "0.1.0"

from .errors import (
    CalibrationInsufficientError,
    ConfigurationInvalidError,
    InvalidInputError,
    NumericFailureError,
    SeqLabError,
)
from .rng import RngStream

__all__ = [
    "RngStream",
    "SeqLabError",
    "InvalidInputError",
    "CalibrationInsufficientError",
    "NumericFailureError",
    "ConfigurationInvalidError",
    "__version__",
]
