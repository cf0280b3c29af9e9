"""Shared result records and verification errors."""

from dataclasses import dataclass


@dataclass
class Diagnostic:
    """A diagnostic attached to a computed object."""

    message: str
    fatal: bool = False


class VerificationError(RuntimeError):
    """Raised when a computed result falsifies the predicted structure.

    The CLI maps this to exit code 2.
    """


class TopologyMismatchError(VerificationError):
    """Raised when a branch is closed where an unbounded one was predicted, or vice versa."""

    def __init__(self, expected: str, found: str, detail: str = ""):
        self.expected = expected
        self.found = found
        message = f"Topology mismatch: expected {expected}, found {found}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
