class ValidationError(ValueError):
    """Bad runtime input (out-of-range labels, malformed masks, ...)."""


class NumericError(RuntimeError):
    """Non-finite values detected during computation."""
