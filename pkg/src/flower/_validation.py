"""Input validation helpers shared by the estimator-facing modules."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_matrix(X, name: str, expected_cols: int | None = None) -> np.ndarray:
    """Validate a 2-d finite float64 array, optionally pinning its width."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if expected_cols is not None and X.shape[1] != expected_cols:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {expected_cols}")
    return X


def check_vector(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x
