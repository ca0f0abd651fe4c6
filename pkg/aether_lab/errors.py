from __future__ import annotations

from collections.abc import Sequence


class ConfigError(ValueError):
    """Invalid run configuration or violated solver precondition."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.detail = message
        super().__init__(f"{field}: {message}")


class HypothesisError(ConfigError):
    """Phases violate the Gutierrez hypotheses."""

    def __init__(self, violated: Sequence[str], message: str):
        self.violated = list(violated)
        super().__init__("phases", message)


class SolverError(RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        residuals: Sequence[float] = (),
        iterates: Sequence[float] = (),
    ):
        self.residuals = [float(value) for value in residuals]
        self.iterates = [float(value) for value in iterates]
        super().__init__(message)


class InstabilityError(SolverError):
    pass
