"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: validation problems exit 1, numerical
or convergence failures exit 2, I/O problems exit 3.
"""


class VolstackError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(VolstackError):
    """Invalid inputs, broken invariants, or malformed configuration."""


class ParseError(ValidationError):
    """Malformed input file content; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(VolstackError):
    """Numerical failure (singular regression, divergence, non-finite loss)."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class ArtifactError(VolstackError):
    """A required run artifact is missing; names the command to run first."""
