"""Exception hierarchy shared across the pipeline.

Each class maps to a distinct CLI exit code and HTTP status, so stages can
fail loudly with a machine-readable kind.
"""


class BenchforgeError(Exception):
    """Base class for all pipeline errors."""

    kind = "error"
    exit_code = 1


class ConfigError(BenchforgeError):
    """Invalid run configuration or plan (missing ranges, bad values)."""

    kind = "config"
    exit_code = 2


class ValidationError(BenchforgeError):
    """An artifact (plan, instance, checkpoint) failed validation."""

    kind = "validation"
    exit_code = 3


class GatePendingError(BenchforgeError):
    """A review gate is pending approval; the pipeline cannot proceed."""

    kind = "gate_pending"
    exit_code = 4

    def __init__(self, stage: str, artifact: str):
        super().__init__(
            f"review gate for stage {stage!r} is pending; "
            f"edit {artifact} if needed, then approve the gate"
        )
        self.stage = stage
        self.artifact = artifact


class BackendError(BenchforgeError):
    """A chat backend failed after exhausting retries."""

    kind = "backend"
    exit_code = 5


class GenerationError(BenchforgeError):
    """Instance generation could not satisfy the plan after bounded retries."""

    kind = "generation"
    exit_code = 3
