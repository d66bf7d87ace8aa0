"""Domain types and the similarity math every other module builds on.

Embeddings are held as 64-bit floats regardless of what a provider returns:
threshold sweeps and average-precision comparisons downstream are
comparison-sensitive, and the datasets involved are small enough that the
extra width is free. Cosine values are clamped into the closed interval
[-1, 1] so rounding noise (|value| = 1 + epsilon) can never leak past a
threshold check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroVector

# Norms below this are treated as zero vectors (provider failure, not data).
ZERO_NORM_EPS = 1e-12

# Tolerance on the unit-norm invariant carried by Embedding.normalized.
UNIT_NORM_TOL = 1e-9


def _as_float64(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"embedding values must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Embedding:
    """A fixed-dimension real vector plus the identity of the model that made it.

    Immutable after construction (the backing array is marked read-only), so
    instances are safe to share across threads.
    """

    values: np.ndarray
    model_id: str = ""
    normalized: bool = False

    def __post_init__(self):
        arr = _as_float64(self.values)
        if arr.size < 1:
            raise ValueError("embedding must have dim >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains NaN or Inf")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.normalized:
            norm = float(np.linalg.norm(arr))
            if abs(norm - 1.0) > UNIT_NORM_TOL:
                raise ValueError(f"normalized=True but L2 norm is {norm!r}")

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def tolist(self) -> list[float]:
        return self.values.tolist()


@dataclass(frozen=True)
class LabeledPair:
    """One dataset row: two questions and a binary duplicate label."""

    question1: str
    question2: str
    is_duplicate: int

    def __post_init__(self):
        if not self.question1.strip() or not self.question2.strip():
            raise ValueError("both questions must be non-empty after trimming")
        if self.is_duplicate not in (0, 1):
            raise ValueError(f"is_duplicate must be 0 or 1, got {self.is_duplicate!r}")


def clamp_score(value: float) -> float:
    """Clamp a similarity value into the closed interval [-1, 1]."""
    return min(1.0, max(-1.0, float(value)))


def validate_threshold(value: float) -> float:
    """Check a threshold lies in [-1, 1] and return it as a float."""
    value = float(value)
    if not -1.0 <= value <= 1.0:
        raise ValueError(f"threshold must lie in [-1, 1], got {value!r}")
    return value


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine similarity dot(a,b)/(|a||b|), clamped into [-1, 1].

    Symmetric in its arguments and invariant under positive scaling of
    either vector.

    Raises:
        DimensionMismatch: if the vectors differ in dimension.
        ZeroVector: if either vector has an L2 norm below 1e-12.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na < ZERO_NORM_EPS or nb < ZERO_NORM_EPS:
        raise ZeroVector("cosine similarity is undefined for (near-)zero vectors")
    return clamp_score(float(np.dot(a.values, b.values)) / (na * nb))


def normalize(a: Embedding) -> Embedding:
    """Return the unit-L2-norm embedding pointing in the same direction.

    Idempotent: an embedding already flagged normalized is returned as-is,
    so repeated normalization is bitwise stable.

    Raises:
        ZeroVector: if the input norm is below 1e-12.
    """
    if a.normalized:
        return a
    norm = float(np.linalg.norm(a.values))
    if norm < ZERO_NORM_EPS:
        raise ZeroVector("cannot normalize a (near-)zero vector")
    return Embedding(values=a.values / norm, model_id=a.model_id, normalized=True)
