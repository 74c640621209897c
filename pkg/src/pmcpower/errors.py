"""Exception hierarchy shared by the pipeline modules.

Everything user-facing derives from PipelineError so the CLI can map any
input or validation problem to a single exit code.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(PipelineError):
    """A trace/dataset/model file violates its format contract.

    Carries the offending path and 1-based physical line number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(f"{loc}{message}")


class SyncError(PipelineError):
    """Trace pair cannot be synchronised (insufficient overlap, ambiguity)."""


class FitError(PipelineError):
    """Least-squares fit is infeasible on the given data."""


class RankDeficientError(FitError):
    """Design matrix is exactly rank deficient."""


class ModelError(PipelineError):
    """A model cannot be applied to the given row or dataset."""


class SearchError(PipelineError):
    """Counter-subset search cannot run with the given configuration."""


class GenError(PipelineError):
    """Synthetic-data generation spec is invalid."""
