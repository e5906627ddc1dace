"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad user input: dimensions, file schemas, CLI arguments."""


class NumericalError(RuntimeError):
    """A numerically impossible situation (singular matrix, divergence)."""
