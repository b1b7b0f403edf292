"""
Exception hierarchy for the GANICE laboratory
Every failure raised by the library derives from GaniceError
"""

from typing import Any, List, Optional


class GaniceError(Exception):
    """Base class for all laboratory errors."""


class ContractError(GaniceError, ValueError):
    """An operation's preconditions were violated."""


class ShapeError(ContractError):
    """Input dimension does not match the network or law."""


class DomainError(ContractError):
    """A point lies outside the operation's domain."""


class CapacityError(ContractError):
    """A support exceeds the exact solver's capacity."""


class UnsupportedActivationError(ContractError):
    """The activation cannot be used for the requested operation."""


class SlopeUndefinedError(ContractError):
    """Rate-study risks are degenerate, so no log-log slope exists."""


class SolverError(GaniceError):
    """An iterative solver failed to reach optimality."""


class TrainingDivergedError(GaniceError):
    """
    Training produced a non-finite gradient or loss.

    Carries the step index and the last finite checkpoint, if any.
    """

    def __init__(self, message: str, step: int, checkpoint: Optional[Any] = None):
        super().__init__(f"{message} (step {step})")
        self.step = step
        self.checkpoint = checkpoint


class DataFormatError(GaniceError, ValueError):
    """A data file does not follow the expected layout."""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        location = ""
        if path is not None:
            location = f" [{path}" + (f":{line_number}" if line_number is not None else "") + "]"
        super().__init__(message + location)
        self.path = path
        self.line_number = line_number


class DataIOError(GaniceError, OSError):
    """A required data file is missing or unreadable."""


class ConfigValidationError(GaniceError, ValueError):
    """Configuration failed validation; lists every problem found."""

    def __init__(self, errors: List[str], offending_keys: Optional[List[str]] = None):
        self.errors = list(errors)
        self.offending_keys = list(offending_keys or [])
        detail = "; ".join(self.errors)
        if self.offending_keys:
            detail += f" (offending keys: {', '.join(self.offending_keys)})"
        super().__init__(f"Configuration validation failed: {detail}")


__all__ = [
    'GaniceError',
    'ContractError',
    'ShapeError',
    'DomainError',
    'CapacityError',
    'UnsupportedActivationError',
    'SlopeUndefinedError',
    'SolverError',
    'TrainingDivergedError',
    'DataFormatError',
    'DataIOError',
    'ConfigValidationError',
]
