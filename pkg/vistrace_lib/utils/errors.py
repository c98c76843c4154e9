"""
Exception hierarchy for the toolkit.

Every error carries an ``exit_code`` that the command-line front end maps to the process
exit status: 2 for malformed input, 3 for context-budget problems, 4 for id alignment
problems and 1 for everything else.
"""


class VisTraceError(Exception):
    """Base class of all toolkit errors."""
    exit_code = 1


class InputFormatError(VisTraceError):
    """Input data is malformed or violates a format rule."""
    exit_code = 2


class ZeroVector(InputFormatError):
    """A vector with (numerically) zero norm cannot be normalized."""


class DimensionMismatch(InputFormatError):
    """Vectors or matrices with incompatible dimensions were combined."""


class EmptyInput(InputFormatError):
    """An operation that needs at least one element received none."""


class InvalidKernel(InputFormatError):
    """A similarity kernel is not square or contains non-finite entries."""


class EmptyManifest(InputFormatError):
    """A video manifest has no frames."""


class EmptySegment(InputFormatError):
    """No frame falls inside a requested time segment."""


class MalformedCall(InputFormatError):
    """A tool-call block exists but does not validate against the tool registry."""


class UnknownLabel(InputFormatError):
    """A mock backend fixture has no entry for the requested label."""


class OutOfBounds(InputFormatError):
    """A pixel coordinate or box lies outside the frame."""


class ZeroGroundTruth(InputFormatError):
    """Relative accuracy is undefined for a zero ground truth."""


class BudgetTooSmall(VisTraceError):
    """The context budget cannot hold the irreducible part of an episode."""
    exit_code = 3


class IdMismatch(VisTraceError):
    """Traces and evaluation records do not share the same ids."""
    exit_code = 4


class TooLarge(VisTraceError):
    """An exhaustive enumeration exceeds its size bound."""


class DuplicateTool(VisTraceError):
    """A tool name is registered twice."""


class ToolFailure(VisTraceError):
    """A tool backend failed (remote error, timeout, bad response)."""


class ConfigError(VisTraceError):
    """A configuration value is invalid or a referenced path is missing."""


class IOFailure(VisTraceError):
    """Reading or writing a file failed."""


class ModelFailure(VisTraceError):
    """The model client could not produce a response."""
