"""Input validation helpers for the estimator surfaces."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

N_FEATURES = 10
N_DELTA_COLUMNS = 5


def _finite_nonnegative(X, what):
    if np.any(X < 0):
        raise ValueError(f"{what} must be non-negative")
    return X


def check_feature_array(X) -> np.ndarray:
    """Validate an (n, 10) interface-feature matrix."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} feature columns, got {X.shape[1]}")
    return _finite_nonnegative(X, "interface features")


def check_delta_array(X) -> np.ndarray:
    """Validate an (n, 5) counter-delta matrix: elapsed then four deltas."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != N_DELTA_COLUMNS:
        raise ValueError(f"expected {N_DELTA_COLUMNS} delta columns, got {X.shape[1]}")
    if np.any(X[:, 0] <= 0):
        raise ValueError("elapsed_s must be positive")
    return _finite_nonnegative(X, "counter deltas")


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ValueError(f"labels must be a 1-D array of length {n_samples}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 (benign) or 1 (attack)")
    return y.astype(np.int64)
