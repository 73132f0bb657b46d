"""Input validation helpers shared by the estimators and free functions."""

from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (or array of angles) into [-pi, pi)."""
    if np.isscalar(a):
        return (float(a) + math.pi) % TWO_PI - math.pi
    return (np.asarray(a, dtype=float) + math.pi) % TWO_PI - math.pi


def angle_diff(a, b):
    """Absolute wrapped difference |a - b| in [0, pi]."""
    return np.abs(wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def check_point(p, name="point") -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"{name} must be a 2D point, got shape {np.shape(p)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


def check_points(pts, name="points", min_count=1) -> np.ndarray:
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] < min_count:
        raise ValueError(f"{name} needs at least {min_count} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def check_angle(a, name="angle") -> float:
    if not isinstance(a, Real) or not math.isfinite(float(a)):
        raise ValueError(f"{name} must be a finite real, got {a!r}")
    return float(a)


def check_positive(x, name, strict=True) -> float:
    if not isinstance(x, Real) or not math.isfinite(float(x)):
        raise ValueError(f"{name} must be a finite real, got {x!r}")
    if (strict and x <= 0) or (not strict and x < 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {x}")
    return float(x)


def check_int(x, name, low=None, high=None) -> int:
    if isinstance(x, bool) or not isinstance(x, Integral):
        raise ValueError(f"{name} must be an integer, got {x!r}")
    x = int(x)
    if low is not None and x < low:
        raise ValueError(f"{name} must be >= {low}, got {x}")
    if high is not None and x > high:
        raise ValueError(f"{name} must be <= {high}, got {x}")
    return x


def check_is_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        from sklearn.exceptions import NotFittedError

        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first."
        )
