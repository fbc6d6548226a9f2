"""Exception types shared across the toolkit."""

from __future__ import annotations


class DistGraphError(Exception):
    """Base class for all toolkit errors."""


class IndexMismatch(DistGraphError):
    """Anchor and target node sets disagree."""


class EdgeViolation(DistGraphError):
    """A distortion edge breaches validity, ordering, or functional comparison."""


class ScoreOutOfRange(DistGraphError):
    """A quality score falls outside [0, 1]."""


class UnknownRegion(DistGraphError):
    """A region index does not exist in the graph."""


class ParseError(DistGraphError):
    """Malformed input bytes.

    ``offset`` is the byte offset of the failure where known, else -1.
    """

    def __init__(self, message: str, offset: int = -1):
        super().__init__(message)
        self.offset = offset


class ValidationError(DistGraphError):
    """A graph failed validation; carries the violation list."""

    def __init__(self, violations):
        super().__init__(
            "; ".join(str(v) for v in violations) or "validation failed"
        )
        self.violations = list(violations)


class InvalidCombination(DistGraphError):
    """Distortion family and severity cannot be combined."""


class DimensionMismatch(DistGraphError):
    """Rasters that must share dimensions do not."""


class EmptyRegion(DistGraphError):
    """A region resolves to zero pixels."""


class OutOfRange(DistGraphError):
    """A numeric argument falls outside its documented domain."""


class DuplicateKey(DistGraphError):
    """A table contains the same key twice."""


class MissingPrediction(DistGraphError):
    """A prediction set does not cover every region of the manifest."""


class MissingGraph(DistGraphError):
    """A manifest references a graph file that cannot be loaded."""


class InsufficientScenes(DistGraphError):
    """Not enough scenes to build the requested corpus."""
