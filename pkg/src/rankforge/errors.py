"""Exception types shared across the package."""

from __future__ import annotations


class RankforgeError(Exception):
    """Base class for all package errors."""


class ConfigError(RankforgeError):
    """Invalid configuration or missing input."""


class NotFoundError(RankforgeError):
    """A referenced id is absent from the collection it was looked up in."""


class ServiceError(RankforgeError):
    """A remote generator/ranker/metric call failed.

    Carries enough context to tell which pipeline unit was affected.
    """

    def __init__(self, message: str, *, query_id: str | None = None, role: str | None = None):
        super().__init__(message)
        self.query_id = query_id
        self.role = role


class GenerationParseError(RankforgeError):
    """Raw generator output did not contain a usable JSON object."""


class GenerationValidationError(RankforgeError):
    """Extracted generator output violated the response contract.

    ``violations`` lists every failed check, not just the first one.
    """

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class RunFormatError(RankforgeError):
    """A ranked-run file line failed to parse or violated run invariants."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class SelectionError(RankforgeError):
    """Target selection could not be satisfied for the requested group."""


class DataError(RankforgeError):
    """A record is malformed or missing a required label."""


class MetricError(RankforgeError):
    """A metric cannot be computed on the given input."""


class StatsError(RankforgeError):
    """Degenerate input to a statistical test."""
