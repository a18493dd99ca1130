"""
Exception hierarchy for zxcc.

Every error carries the process exit code the command line reports for it.
"""
from typing import Any, Optional


class ZXError(Exception):
    """Base class for all zxcc errors."""

    exit_code = 2


class DiagramFormatError(ZXError):
    """Malformed diagram, rule or trace document."""


class DiagramInvariantError(ZXError):
    """A diagram violates a degree or boundary invariant."""


class ArityMismatchError(ZXError):
    """Wire counts or matrix dimensions do not line up."""


class RuleError(ZXError):
    """Bad rule definition, box count or unknown rule/simproc name."""


class StaleMatchError(ZXError):
    """A match was applied to a diagram it was not found in."""


class RingDivisionError(ZXError, ArithmeticError):
    """The quotient of two ring elements is not in Z[ω, 1/√2]."""


class ResourceLimitError(ZXError):
    """A configured size bound was exceeded."""

    exit_code = 3


class StepBudgetExceeded(ResourceLimitError):
    """A simproc ran out of steps; the partial trace is attached."""

    def __init__(self, message: str, trace: Any = None):
        super().__init__(message)
        self.trace = trace


class TraceReplayError(ZXError):
    """Replaying a proof trace did not reproduce a recorded digest."""

    exit_code = 1

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class SearchExhaustedError(ZXError):
    """A bounded search found no candidate."""

    exit_code = 1
