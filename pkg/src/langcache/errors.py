"""Exception hierarchy shared across the package.

Every error raised by langcache derives from LangCacheError so callers can
catch one base class at API boundaries (the CLI maps subfamilies to exit
codes: data errors -> 2, upstream/provider errors -> 3).
"""

from __future__ import annotations


class LangCacheError(Exception):
    """Base class for all langcache errors."""


class DataError(LangCacheError):
    """Invalid user-supplied data or configuration (CLI exit code 2)."""


class UpstreamError(LangCacheError):
    """Failure of a remote dependency: embedding provider or LLM (exit code 3)."""


# -- vector math ---------------------------------------------------------


class DimensionMismatch(DataError):
    """Two vectors (or a vector and an index) disagree on dimensionality."""


class ZeroVector(DataError):
    """A vector with near-zero L2 norm where a direction is required.

    A zero embedding indicates provider failure, never valid semantics, so
    it is always an error rather than being silently mapped.
    """


# -- provider ------------------------------------------------------------


class EmptyInput(DataError):
    """An embedding request contained no texts or an empty text."""


class ProviderTimeout(UpstreamError):
    """The embedding provider did not answer within the configured timeout."""


class ProviderHttpError(UpstreamError):
    """Non-2xx response (or transport failure) from an embedding provider."""

    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body[:512]


# -- index / cache -------------------------------------------------------


class DuplicateId(DataError):
    """Attempt to insert an id that is already present in the index."""


class EmptyQuery(DataError):
    """A cache operation received an empty (or all-whitespace) query."""


class CorruptSnapshot(DataError):
    """A persistence snapshot failed its checksum or did not parse."""


class ModelMismatch(DataError):
    """A snapshot was written by a different embedding model than configured."""


# -- evalkit -------------------------------------------------------------


class SchemaError(DataError):
    """A dataset file is missing required columns."""


class RowError(DataError):
    """One or more dataset rows were rejected; carries their line numbers."""

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = list(problems)
        lines = "; ".join(f"line {n}: {why}" for n, why in self.problems)
        super().__init__(f"{len(self.problems)} bad row(s): {lines}")


class NoPositives(DataError):
    """Average precision is undefined without at least one positive pair."""


class DegenerateLabels(DataError):
    """Threshold calibration needs both a positive and a negative pair."""


# -- synthgen ------------------------------------------------------------


class NoJsonFound(UpstreamError):
    """No balanced JSON object with a 'queries' key in an LLM response."""


class WrongArity(UpstreamError):
    """The 'queries' list did not contain exactly two items."""


class EmptyItem(UpstreamError):
    """A generated query was empty (or not a string) after trimming."""


class LlmError(UpstreamError):
    """A generation prompt failed after exhausting its retries."""
