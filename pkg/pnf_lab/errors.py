"""Exception hierarchy shared by the library and the command line.

Every error raised on purpose by ``pnf_lab`` derives from :class:`PnfError`.
The class attribute ``exit_code`` is what the CLI returns when the error
escapes a subcommand: 2 for problems with the caller's input, 3 for internal
limits and numerical failures.
"""

from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_INTERNAL_ERROR = 3


class PnfError(Exception):
    """Base class for all pnf-lab errors."""

    exit_code = EXIT_INTERNAL_ERROR

    def __init__(self, message: str, hint: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.hint = hint


class InvalidArgumentError(PnfError, ValueError):
    """Raised when scores, privacy parameters or call arguments are invalid."""

    exit_code = EXIT_INPUT_ERROR


class HistogramParseError(InvalidArgumentError):
    """Raised when a histogram CSV cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, hint: Optional[str] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, hint=hint)
        self.line = line


class EpsilonRangeError(InvalidArgumentError):
    """Raised when a target error is not reachable on the searched epsilon bracket."""


class SizeLimitError(PnfError):
    """Raised when a computation would exceed a configured size cap."""

    def __init__(self, message: str, size: int, cap: int, hint: Optional[str] = None):
        super().__init__(message, hint=hint)
        self.size = size
        self.cap = cap


class SolverFailureError(PnfError):
    """Raised when the simplex solver cannot produce an optimum."""

    def __init__(
        self,
        message: str,
        diagnostics: Optional[Dict[str, Any]] = None,
        hint: Optional[str] = None,
    ):
        super().__init__(message, hint=hint)
        self.diagnostics = dict(diagnostics or {})


class InfeasibleModelError(SolverFailureError):
    """Raised when phase one of the simplex proves the model infeasible."""


class QuadratureAccuracyError(PnfError):
    """Raised when numerical integration misses its absolute tolerance."""

    def __init__(self, message: str, estimate: float, abserr: float, tolerance: float):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr
        self.tolerance = tolerance


class RejectionLimitError(PnfError):
    """Raised when the rejection sampler exhausts its iteration cap."""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations
