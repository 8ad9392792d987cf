"""Input checks shared by the estimators."""
from __future__ import annotations

import math

import numpy as np
from sklearn.utils.validation import check_array


def check_points(X) -> np.ndarray:
    """Coerce observation points to a finite float array of shape (n, 2)."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"points must have 2 columns (x, y), got {X.shape[1]}")
    return X


def check_strength(gamma) -> float:
    """Accept a non-negative number, inf, or the string 'inf'."""
    if isinstance(gamma, str):
        if gamma.strip().lower() in ("inf", "infinity", "impenetrable"):
            return math.inf
        gamma = float(gamma)
    gamma = float(gamma)
    if not gamma >= 0:
        raise ValueError(f"potential strength must be >= 0, got {gamma}")
    return gamma


def check_positive(name: str, value) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
