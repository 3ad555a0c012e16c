"""
STGFormer Pose Lifter - Exceptions
One hierarchy for every failure the library reports to the CLI.
"""


class StgformerError(Exception):
    """Base class for all library errors."""


class ConfigError(StgformerError):
    """Invalid configuration, or a configuration that does not match a checkpoint."""


class GraphError(StgformerError):
    """Invalid skeleton topology (out-of-range index, duplicate edge, self-loop)."""


class ShapeError(StgformerError):
    """Tensor shapes do not agree with an operation's contract."""


class PoseFileError(StgformerError):
    """
    Malformed pose or tensor container.

    Attributes:
        offset (int): Byte offset where the problem was detected
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class CheckpointError(StgformerError):
    """Checkpoint manifest and payload disagree."""


class TrainingError(StgformerError):
    """Empty dataset, non-finite loss, or non-finite gradient."""


class GradcheckFailure(StgformerError):
    """Analytic and finite-difference gradients disagree beyond tolerance."""

    def __init__(self, report):
        super().__init__(
            f"gradient check failed: max relative error {report.max_rel_error:.3e} "
            f"in '{report.worst_parameter}' (tolerance {report.tolerance:.1e})"
        )
        self.report = report


class InvalidInputError(StgformerError):
    """Non-finite or malformed numeric input to the model or metrics."""
