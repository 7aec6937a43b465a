"""Exception hierarchy shared by every ghostkit subpackage."""

from typing import Any, Optional


class GhostkitError(Exception):
    """Base class for all errors raised by ghostkit."""


class ConfigError(GhostkitError, ValueError):
    """Invalid parameters or inputs (negative weights, empty dimensions, ...)."""


class ShapeError(ConfigError):
    """Operands whose shapes disagree along a specific axis."""

    def __init__(self, op: str, axis: str, expected: Any, got: Any):
        self.op = op
        self.axis = axis
        self.expected = expected
        self.got = got
        super().__init__(f"{op}: shape mismatch on axis '{axis}' (expected {expected}, got {got})")


class ComputationError(GhostkitError, RuntimeError):
    """A numerical procedure produced non-finite values or diverged."""

    def __init__(self, message: str, trace: Optional[Any] = None):
        super().__init__(message)
        self.trace = trace


class MemoryBudgetError(ComputationError):
    """The estimated activation memory exceeds the configured budget."""


class ContainerError(GhostkitError):
    """Malformed or unsupported GITK container file."""
