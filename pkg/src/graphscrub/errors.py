"""Exception taxonomy shared across the package.

The CLI maps these onto its exit-code scheme: InputError -> 1,
TrainingDivergenceError / NumericError -> 2, I/O errors -> 3,
SnapshotMissingError -> 4.
"""


class InputError(ValueError):
    """Caller passed invalid arguments (bad ids, shape mismatch, empty mask)."""


class TrainingDivergenceError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}: loss is not finite")


class NumericError(RuntimeError):
    """A numeric quantity that must be finite is not."""


class StateError(RuntimeError):
    """An operation was called on state it cannot work with."""


class SnapshotMissingError(StateError):
    """Model lacks the stored training-gradient snapshot required by Rectify."""

    def __init__(self):
        super().__init__(
            "model has no stored training-gradient snapshot; retrain with "
            "snapshot storage enabled (the default for graphscrub train) "
            "before requesting unlearning"
        )
