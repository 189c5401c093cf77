"""Exception types shared across the package."""


class VoxWofeError(Exception):
    """Base class for all package errors."""


class DegenerateInputError(VoxWofeError, ValueError):
    """Input geometry or data too degenerate to process."""


class ConfigurationError(VoxWofeError, ValueError):
    """Inconsistent configuration or modeling-space setup."""


class BoreholeDataError(VoxWofeError, ValueError):
    """Invalid borehole table content.

    ``issues`` holds ``(table, row, reason)`` triples; row numbers are
    1-based data rows (the header is row 0).
    """

    def __init__(self, issues):
        self.issues = list(issues)
        lines = [f"{table} row {row}: {reason}" for table, row, reason in self.issues]
        super().__init__("; ".join(lines))


class DegenerateTrainingError(VoxWofeError, ValueError):
    """Training mask is empty or fills the whole modeling space."""


class ZeroCellError(VoxWofeError, ValueError):
    """A contingency cell needed by a weight formula is zero."""

    def __init__(self, cell: str, message: str | None = None):
        self.cell = cell
        super().__init__(message or f"contingency cell {cell} is zero")


class EmptyModelError(VoxWofeError, ValueError):
    """Every evidence layer was excluded by selection."""


class NoIntersectionError(VoxWofeError, ValueError):
    """Prediction-rate and occupied-volume curves never cross."""


class SchemaVersionError(VoxWofeError):
    """An intermediate file was written by an incompatible schema version."""


class PipelineError(VoxWofeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the reason."""

    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")
