"""Exception types shared across the library and mapped to CLI exit codes."""

from __future__ import annotations


class InputError(ValueError):
    """Malformed or inconsistent input: bad JSON, schema violation, failed precondition.

    CLI exit code 2. ``detail`` carries a machine-readable location (field path,
    line/column, offending triple) when one exists.
    """

    def __init__(self, message: str, detail=None):
        super().__init__(message)
        self.detail = detail


class PropertyFailure(RuntimeError):
    """A certified property did not hold; carries the witness (eigenpair, subset, ...).

    CLI exit code 1.
    """

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class ConsistencyError(RuntimeError):
    """Two independent computation routes disagreed beyond tolerance. Exit code 1."""


class ConvergenceError(RuntimeError):
    """Iterative solver ran out of iterations; carries the best residual. Exit code 3."""

    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_INPUT = 2
EXIT_NONCONVERGENCE = 3
