"""Input coercion shared by the numerical modules."""

from __future__ import annotations

import numpy as np


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def as_matrix(a, name: str = "matrix", cols: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-D float array.

    An empty input with a known column count becomes a ``0 x cols`` matrix,
    which is how absent equality blocks are represented.
    """
    m = np.asarray(a, dtype=float)
    if m.size == 0 and cols is not None:
        return np.zeros((0, cols))
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_points(points, name: str = "points") -> np.ndarray:
    """Stack a sequence of equal-length vectors into an ``m x n`` array."""
    try:
        arr = np.asarray(points, dtype=float)
    except ValueError as exc:
        raise ValueError(f"{name}: all points must have the same dimension") from exc
    if arr.ndim == 1:
        # a list of scalars is a set of 1-D points
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a list of vectors, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr
