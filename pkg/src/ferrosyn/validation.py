"""Input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np

__all__ = [
    "check_scalar",
    "check_unit_interval",
    "check_vector",
    "check_matrix",
]


def check_scalar(
    x,
    name: str,
    *,
    minimum: float | None = None,
    maximum: float | None = None,
    strict_min: bool = False,
    strict_max: bool = False,
) -> float:
    """Validate a real scalar, optionally against open/closed bounds."""
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    if minimum is not None:
        if strict_min and not x > minimum:
            raise ValueError(f"{name} must be > {minimum}, got {x}")
        if not strict_min and not x >= minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {x}")
    if maximum is not None:
        if strict_max and not x < maximum:
            raise ValueError(f"{name} must be < {maximum}, got {x}")
        if not strict_max and not x <= maximum:
            raise ValueError(f"{name} must be <= {maximum}, got {x}")
    return x


def check_unit_interval(x, name: str) -> float:
    return check_scalar(x, name, minimum=0.0, maximum=1.0)


def check_vector(x, name: str, *, length: int | None = None, dtype=float) -> np.ndarray:
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


def check_matrix(x, name: str, *, shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {arr.shape}")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr
