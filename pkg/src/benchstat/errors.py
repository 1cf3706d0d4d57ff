"""Exception types shared across the package."""


class BenchstatError(Exception):
    """Base class for all benchstat errors."""


class InputError(BenchstatError):
    """Malformed or contract-violating user input (CSV rows, bad flags, ...)."""


class ComputationError(BenchstatError):
    """Internal numerical failure (non-finite likelihood, degenerate data, ...)."""
