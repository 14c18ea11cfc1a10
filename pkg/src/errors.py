"""Exception hierarchy shared by every tracking stage"""

from pathlib import Path
from typing import Optional


class TrackingError(Exception):
    """Base class for all errors raised by the tracker"""


class InputError(TrackingError):
    """Malformed input file, invalid argument or violated precondition"""

    def __init__(
        self,
        message: str,
        path: Optional[Path | str] = None,
        line: Optional[int] = None,
    ):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(self._render())

    def _render(self) -> str:
        if self.path is not None and self.line is not None:
            return f"{self.path}:{self.line}: {self.message}"
        if self.line is not None:
            return f"line {self.line}: {self.message}"
        if self.path is not None:
            return f"{self.path}: {self.message}"
        return self.message


class PreconditionError(InputError):
    """Operation called on an empty bank, trajectory or similar"""


class NumericalError(TrackingError):
    """Singular matrix, failed square root or degenerate geometry"""

    def __init__(self, message: str, **context):
        self.message = message
        self.context = context
        if context:
            details = ", ".join(f"{k}={v}" for k, v in sorted(context.items()))
            message = f"{message} ({details})"
        super().__init__(message)
