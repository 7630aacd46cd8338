"""Exception types shared across the package."""


class SeqLabError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(SeqLabError):
    """A precondition on an operation's inputs was violated."""


class CalibrationInsufficientError(SeqLabError):
    """Monte-Carlo budget too small for the requested quantile resolution."""


class NumericFailureError(SeqLabError):
    """A numerical routine failed to converge; the message carries diagnostics."""


class ConfigurationInvalidError(SeqLabError):
    """An experiment configuration violates a structural premise."""
