"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class FairRerankError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(FairRerankError, ValueError):
    exit_code = 2


class DataError(FairRerankError, ValueError):
    exit_code = 3


class EmptyInputError(DataError):
    pass


class EmptyCoreError(DataError):
    """k-core filtering removed every interaction."""


class ValidationError(DataError):
    pass


class ShortListError(DataError):
    pass


class UndefinedMetricError(DataError):
    pass


class TrainingError(FairRerankError, RuntimeError):
    exit_code = 4

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class SolverError(FairRerankError, RuntimeError):
    exit_code = 4


class OracleTooLargeError(SolverError):
    pass


class BatchError(FairRerankError):
    """Per-user failures collected over a batch, keyed by user id."""

    def __init__(self, failures: dict[str, Exception]):
        self.failures = dict(failures)
        codes = {getattr(e, "exit_code", 1) for e in self.failures.values()}
        self.exit_code = max(codes) if codes else 1
        shown = ", ".join(f"{u}: {e}" for u, e in list(self.failures.items())[:5])
        more = "" if len(self.failures) <= 5 else f" (+{len(self.failures) - 5} more)"
        super().__init__(f"{len(self.failures)} user(s) failed: {shown}{more}")
