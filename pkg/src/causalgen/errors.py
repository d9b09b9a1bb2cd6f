"""Exception types shared across the package."""


class TrainingDiverged(RuntimeError):
    """Raised when a training loss becomes NaN/inf; carries epoch/batch context."""


class VersionMismatch(RuntimeError):
    """Raised when a checkpoint or config carries an incompatible version tag."""
