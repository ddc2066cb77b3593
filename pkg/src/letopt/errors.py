"""Exception types shared across the toolkit."""


class LetOptError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(LetOptError):
    """A task-set document violates the input schema or a model invariant.

    ``path`` points at the offending element, e.g. ``tasks[2].priority``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class InfeasibleError(LetOptError):
    """A simulated schedule missed a deadline.

    Carries the first missing job and the instant of the miss.
    """

    def __init__(self, job, instant):
        super().__init__(f"deadline miss: {job.task} job {job.index} at t={instant}")
        self.job = job
        self.instant = instant


class ConsistencyError(LetOptError):
    """An internal invariant failed (e.g. the steady-state windows of a
    schedule do not repeat)."""


class UsageError(LetOptError):
    """Bad command-line usage."""
