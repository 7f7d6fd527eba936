"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations

from typing import Any


class ChloromesoError(Exception):
    exit_code = 1

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context = context

    def record(self) -> dict[str, Any]:
        """Machine-readable form used by the CLI error channel."""
        return {
            "code": self.exit_code,
            "error": type(self).__name__,
            "message": self.message,
            "context": {k: _plain(v) for k, v in self.context.items()},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


class ConfigError(ChloromesoError, ValueError):
    exit_code = 2


class ParameterError(ConfigError):
    """A domain value violates its invariant (negative age, T <= 0, ...)."""


class PackingIncomplete(ChloromesoError):
    exit_code = 3

    def __init__(self, message: str, achieved_fraction: float, **context: Any) -> None:
        super().__init__(message, achieved_fraction=achieved_fraction, **context)
        self.achieved_fraction = achieved_fraction


class LinearSolveFailure(ChloromesoError):
    exit_code = 4


class AnalysisError(ChloromesoError):
    exit_code = 5


class EmptyField(AnalysisError):
    pass


class DepthOutOfRange(AnalysisError):
    pass


class InsufficientOverlap(AnalysisError):
    pass
