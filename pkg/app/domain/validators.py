from __future__ import annotations

from typing import Any, Iterable, Sequence

import numpy as np

from app.domain.errors import DimensionMismatch, EmptyInput
from app.domain.schemas import DistortionVector


def as_vector(value: Any) -> np.ndarray:
    """Coerce a DistortionVector, BitAllocation-like sequence or array into a 1-D float array."""
    if isinstance(value, DistortionVector):
        return np.asarray(value.values, dtype=float)
    if hasattr(value, "bits"):
        return np.asarray(value.bits, dtype=float)
    return np.asarray(value, dtype=float).reshape(-1)


def as_matrix(rows: Iterable[Any], *, what: str = "points") -> np.ndarray:
    """Stack vectors into an (n, N) float array, rejecting empty or ragged input."""
    if isinstance(rows, np.ndarray):
        matrix = np.asarray(rows, dtype=float)
        if matrix.ndim != 2:
            raise DimensionMismatch(f"{what} must be a 2-D array, got shape {matrix.shape}")
    else:
        vectors = [as_vector(row) for row in rows]
        if not vectors:
            raise EmptyInput(f"no {what} given")
        ensure_same_dimension(vectors, what=what)
        matrix = np.vstack(vectors)
    if matrix.shape[0] == 0:
        raise EmptyInput(f"no {what} given")
    return matrix


def ensure_same_dimension(vectors: Sequence[np.ndarray], *, what: str = "points") -> int:
    dims = {vector.shape[0] for vector in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"{what} have mixed dimensions {sorted(dims)}")
    return dims.pop()


def dedupe_rows(matrix: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Keep the first occurrence of rows closer than tol (Euclidean), preserving order."""
    buffer = np.empty_like(matrix, dtype=float)
    count = 0
    for row in matrix:
        if count and np.linalg.norm(buffer[:count] - row, axis=1).min() <= tol:
            continue
        buffer[count] = row
        count += 1
    return buffer[:count].copy()


__all__ = ["as_matrix", "as_vector", "dedupe_rows", "ensure_same_dimension"]
