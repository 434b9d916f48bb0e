"""
Custom exceptions for cellcheck.

Every error raised by the library derives from CellCheckError and carries a
short machine-readable code, so the CLI and callers can branch on it.
"""

from typing import Optional


class CellCheckError(Exception):
    """Base class for exceptions raised by cellcheck."""

    code = 'error'

    def __init__(self, message: str = ''):
        self.message = message
        super().__init__(f"[{self.code}] {message}" if message else self.code)


# ==================== Network Errors ====================

class NetworkFormatError(CellCheckError):
    """
    The network file does not follow the line-oriented network format.

    Attributes:
        line: 1-based line number where parsing failed (None if unknown)
    """

    code = 'networkFormat'

    def __init__(self, message: str = '', line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeMismatchError(NetworkFormatError):
    """A weight matrix or bias vector does not match the declared layer sizes."""

    code = 'shapeMismatch'

    def __init__(self, message: str = '', layer: Optional[int] = None,
                 line: Optional[int] = None):
        self.layer = layer
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message, line)


class NonFiniteWeightError(NetworkFormatError):
    """A weight or bias is NaN or infinite."""

    code = 'nonFiniteWeight'


class DimensionError(CellCheckError):
    """An input vector or cell does not match the network input dimension."""

    code = 'dimension'


class DimensionTooLargeError(DimensionError):
    """Corner evaluation was requested for a cell with too many dimensions."""

    code = 'dimensionTooLarge'


# ==================== Partition Errors ====================

class PartitionError(CellCheckError):
    """Base class for invalid operations on a partition tree."""

    code = 'partition'


class NotALeafError(PartitionError):
    """The cell to split is an internal node of the tree."""

    code = 'notALeaf'


class EmptySplitError(PartitionError):
    """A split was requested with no dimensions."""

    code = 'emptySplit'


class DegenerateSplitError(PartitionError):
    """The midpoint of a split dimension coincides with one of its bounds."""

    code = 'degenerateSplit'


class DomainError(PartitionError):
    """A point or query box lies outside the partitioned domain."""

    code = 'outOfDomain'


# ==================== Model and Configuration Errors ====================

class ModelError(CellCheckError):
    """Invalid use of a dynamics model."""

    code = 'model'


class UnknownActionError(ModelError):
    """The action is not part of the model's action space."""

    code = 'unknownAction'


class ConfigError(CellCheckError):
    """Inconsistent or invalid run configuration."""

    code = 'config'


class ExportFormatError(CellCheckError):
    """A file is not a readable cellcheck export."""

    code = 'exportFormat'


class ConvergenceWarning(UserWarning):
    """Value iteration stopped at max_sweeps before reaching the fixpoint."""

