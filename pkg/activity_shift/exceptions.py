"""
Custom exceptions for the activity-shift toolkit.
"""

from typing import Any, Dict, List, Optional


class ActivityShiftError(Exception):
    """Base exception for all activity-shift errors."""
    pass


class DegenerateInputError(ActivityShiftError):
    """Exception raised when an input carries no usable signal (empty timeline, zero mean rate)."""
    pass


class ValidationError(ActivityShiftError):
    """Exception raised when a value violates a domain invariant."""

    def __init__(self, message: str, detail: Any = None, line: Optional[int] = None):
        """
        Initialize the ValidationError exception.

        Args:
            message: Error message
            detail: Detailed error information
            line: 1-based input line number, when the value came from a file
        """
        self.detail = detail
        self.line = line
        self.message = f"line {line}: {message}" if line is not None else message
        super().__init__(self.message)


class WindowTooShortError(ValidationError):
    """Exception raised when a window cannot hold the requested number of segments."""
    pass


class InsufficientDataError(ValidationError):
    """Exception raised when a user class has too few defined metric values."""

    def __init__(self, user_class: str, count: int, required: int):
        self.user_class = user_class
        super().__init__(
            f"Class '{user_class}' has {count} defined values, at least {required} required",
            detail={"class": user_class, "count": count},
        )


class ConvergenceError(ActivityShiftError):
    """Exception raised when MCMC diagnostics fail their thresholds."""

    def __init__(self, diagnostics: Dict[str, Dict[str, float]], message: Optional[str] = None):
        """
        Initialize the ConvergenceError exception.

        Args:
            diagnostics: Per-parameter diagnostics ({"lambda1": {"rhat": ..., "ess": ...}, ...})
            message: Error message
        """
        self.diagnostics = diagnostics
        super().__init__(message or f"MCMC did not converge: {diagnostics}")


class SourceAPIError(ActivityShiftError):
    """Exception raised for source-client errors."""

    def __init__(self, status_code=None, detail=None, message=None):
        """
        Initialize the SourceAPIError exception.

        Args:
            status_code: HTTP status code
            detail: Detailed error information
            message: Error message
        """
        self.status_code = status_code
        self.detail = detail
        self.message = message or (str(detail) if detail else None) or f"Source error (Status: {status_code})"
        super().__init__(self.message)


class ResourceNotFoundError(SourceAPIError):
    """Exception raised when a requested user or resource is not found."""

    def __init__(self, detail=None, message=None):
        super().__init__(status_code=404, detail=detail, message=message or "Resource not found")


class RateLimitError(SourceAPIError):
    """Exception raised when source rate limits are exceeded."""

    def __init__(self, detail=None, message=None):
        super().__init__(status_code=429, detail=detail, message=message or "Rate limit exceeded")


class ServerError(SourceAPIError):
    """Exception raised for server-side errors."""

    def __init__(self, status_code=None, detail=None, message=None):
        status_code = status_code or 500
        super().__init__(
            status_code=status_code,
            detail=detail,
            message=message or f"Server error occurred (Status: {status_code})"
        )


class SamplingAbortedError(ActivityShiftError):
    """Exception raised when a sampling procedure gives up after bounded retries."""

    def __init__(self, message: str, progress: Any = None):
        """
        Initialize the SamplingAbortedError exception.

        Args:
            message: Error message
            progress: Partial result collected before the abort
        """
        self.progress = progress
        super().__init__(message)


class PipelineError(ActivityShiftError):
    """Exception raised when a batch run fails as a whole."""

    def __init__(self, message: str, errors: Optional[List[Dict[str, str]]] = None):
        self.errors = errors or []
        super().__init__(message)
