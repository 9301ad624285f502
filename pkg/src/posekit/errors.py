"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class PosekitError(Exception):
    """Base class for all package errors."""


class ConfigError(PosekitError):
    """Invalid configuration value or unknown config field."""


class DataError(PosekitError):
    """Missing, malformed, or inconsistent input data."""


class TopologyMismatchError(DataError):
    """Artifact was produced under a different skeleton topology."""


class NumericalError(PosekitError):
    """A computation failed numerically."""


class DegeneratePoseError(NumericalError):
    """A pose contains a zero-length bone or non-finite coordinates."""


class DegenerateProjectionError(NumericalError):
    """A joint sits at or behind the camera plane."""

    def __init__(self, joint_index: int, depth: float):
        self.joint_index = joint_index
        self.depth = depth
        super().__init__(
            f"joint {joint_index} has non-positive depth {depth:.3f} mm; "
            "cannot project"
        )


class AlignmentError(NumericalError):
    """Similarity alignment is ill-posed for this joint configuration."""


class TrainingDivergedError(NumericalError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, step: int, loss: float):
        self.epoch = epoch
        self.step = step
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, step {step}"
        )
