"""Exception hierarchy.

``DataError`` subclasses signal bad input (CLI exit code 2); ``RuntimeFailure``
subclasses signal compute or cluster failures (CLI exit code 3).
"""

from __future__ import annotations


class EpiError(Exception):
    """Base class for all package errors."""


class DataError(EpiError):
    pass


class MalformedGenotype(DataError):
    pass


class MalformedRow(DataError):
    pass


class MalformedLabel(DataError):
    pass


class DuplicatePatient(DataError):
    pass


class DegenerateCohort(DataError):
    pass


class LengthMismatch(DataError):
    pass


class TooFewPatients(DataError):
    pass


class EmptyTestSet(DataError):
    pass


class EmptyResults(DataError):
    pass


class RuntimeFailure(EpiError):
    pass


class ZeroBaseline(RuntimeFailure):
    pass


class ProtocolError(RuntimeFailure):
    pass


class VersionMismatch(ProtocolError):
    pass


class WorkerLost(RuntimeFailure):
    pass


class ClusterTimeout(RuntimeFailure):
    pass


class RunAborted(RuntimeFailure):
    """A run stopped part way; ``completed`` counts finished tasks."""

    def __init__(self, message: str, completed: int = 0, total: int = 0):
        super().__init__(message)
        self.completed = completed
        self.total = total
