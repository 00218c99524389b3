"""Input validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np


def check_array(x, name: str, shape=None, dtype=np.float64) -> np.ndarray:
    """Coerce to a contiguous array, check finiteness and optional shape.

    ``shape`` entries set to -1 are free dimensions.
    """
    arr = np.ascontiguousarray(x, dtype=dtype)
    if shape is not None:
        if arr.ndim != len(shape):
            raise ValueError(f"{name}: expected {len(shape)}-d array, "
                             f"got shape {arr.shape}")
        for want, got in zip(shape, arr.shape):
            if want != -1 and want != got:
                raise ValueError(f"{name}: expected shape "
                                 f"{tuple(shape)}, got {arr.shape}")
    if arr.dtype.kind == "f" and not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains non-finite values")
    return arr


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, "
                         f"got {value!r}")
    return value
