"""Exception hierarchy for the simulator.

Every error carries a stable ``code`` string.  Codes prefixed ``E_`` are
error severity when surfaced as diagnostics, ``W_`` warnings, ``I_`` info.
"""

from __future__ import annotations


class DdsimError(Exception):
    """Base class for all simulator errors."""

    code = "E_INTERNAL"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


class ScenarioParseError(DdsimError):
    """Syntax or name error detected while parsing scenario source."""

    code = "E_PARSE"

    def __init__(self, message: str, line: int = 0, column: int = 0,
                 expected: str = "", found: str = ""):
        super().__init__(message)
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}: " if self.line else ""
        return f"{loc}{self.message}"


class DuplicateName(ScenarioParseError):
    code = "E_DUPLICATE_NAME"


class ValidationError(DdsimError):
    """Semantic error found while validating a parsed scenario."""

    code = "E_VALIDATION"


class UnresolvedType(ValidationError):
    code = "E_UNRESOLVED_TYPE"


class UnresolvedMember(ValidationError):
    code = "E_UNRESOLVED_MEMBER"


class NonConstantInlineShape(ValidationError):
    code = "E_NONCONSTANT_INLINE_SHAPE"


class RecursiveType(ValidationError):
    code = "E_RECURSIVE_TYPE"


class ConflictingClause(ValidationError):
    code = "E_CONFLICTING_CLAUSE"


class UnknownPolicy(ValidationError):
    code = "E_UNKNOWN_POLICY"


class SimulationError(DdsimError):
    """Runtime error raised while executing scenario statements."""

    code = "E_RUNTIME"


class NotLive(SimulationError):
    code = "E_NOT_LIVE"


class UnknownPath(SimulationError):
    code = "E_UNKNOWN_PATH"


class NullDeref(SimulationError):
    code = "E_NULL_DEREF"


class OutOfBounds(SimulationError):
    code = "E_OUT_OF_BOUNDS"


class NegativeShape(SimulationError):
    code = "E_NEGATIVE_SHAPE"


class DivisionByZero(SimulationError):
    code = "E_DIVISION_BY_ZERO"


class DuplicateVariable(SimulationError):
    code = "E_DUPLICATE_VARIABLE"


class DuplicateSpace(SimulationError):
    code = "E_DUPLICATE_SPACE"


class CapacityExceeded(SimulationError):
    code = "E_CAPACITY_EXCEEDED"


class DoubleFree(SimulationError):
    code = "E_DOUBLE_FREE"


class ForeignAddress(SimulationError):
    code = "E_FOREIGN_ADDRESS"


class NotPresent(SimulationError):
    code = "E_NOT_PRESENT"


class AlreadyPresent(SimulationError):
    code = "E_ALREADY_PRESENT"


class BadDeviceRange(SimulationError):
    code = "E_BAD_DEVICE_RANGE"


class OverlappingMapping(SimulationError):
    code = "E_OVERLAP"


class UnbalancedExit(SimulationError):
    code = "E_UNBALANCED_EXIT"


class NoAttachment(SimulationError):
    code = "E_NO_ATTACHMENT"


class DimOutOfRange(SimulationError):
    code = "E_DIM_OUT_OF_RANGE"
