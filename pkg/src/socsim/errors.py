class ProfileError(ValueError):
    """Malformed job or resource profile text."""

    def __init__(self, lineno: int, reason: str):
        self.lineno = lineno
        self.reason = reason
        where = f"line {lineno}: " if lineno else ""
        super().__init__(f"{where}{reason}")


class SchedulingError(RuntimeError):
    """A scheduler produced an assignment the simulator cannot honour."""


class TrainingDivergence(RuntimeError):
    """Loss or parameters became non-finite during training."""
