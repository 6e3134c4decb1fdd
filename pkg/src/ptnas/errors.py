"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments that break its preconditions."""


class DatasetLoadError(Exception):
    """A dataset directory is missing files or contains inconsistent data."""


class InvalidGenomeError(ValueError):
    """An op-sequence string does not describe a valid pipeline."""


class MutationError(Exception):
    """No mutation is applicable to the given genome."""


class TrainingDivergedError(Exception):
    """Training produced a non-finite loss. Carries the 1-based epoch index."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch
