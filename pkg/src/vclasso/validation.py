"""Shared input-validation helpers."""

from __future__ import annotations

import math

import numpy as np


def check_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"{name} has a non-finite entry at position {tuple(bad)}")
    return arr


def check_vector(x, length: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array with finite entries, optionally of fixed length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise ValueError(f"{name} has a non-finite entry at index {bad}")
    return arr


def check_positive(value, name: str, allow_inf: bool = False) -> float:
    """Validate a strictly positive scalar."""
    v = float(value)
    if math.isnan(v) or v <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if math.isinf(v) and not allow_inf:
        raise ValueError(f"{name} must be finite, got {value!r}")
    return v


def check_nonnegative(value, name: str) -> float:
    v = float(value)
    if math.isnan(v) or math.isinf(v) or v < 0:
        raise ValueError(f"{name} must be a finite value >= 0, got {value!r}")
    return v


def freeze_array(arr: np.ndarray) -> np.ndarray:
    """Return a read-only view-owning copy so frozen containers stay immutable."""
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out
