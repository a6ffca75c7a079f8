"""Gram-preserving dimensionality reduction of an episode."""

import numpy as np


def qr_reduce(rows: np.ndarray) -> np.ndarray:
    """
    Re-express rows in an orthonormal basis of their span.

    With ``rows.T = Q R`` (reduced QR of the d x N transpose), the rows of
    ``R.T`` have the same pairwise inner products as the input rows, in
    ``min(d, N)`` coordinates.

    Args:
        rows: N x d matrix

    Returns:
        N x min(d, N) matrix with the same Gram matrix

    Raises:
        ValueError: On non-finite input
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError(f"qr_reduce expects a matrix, got shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("qr_reduce received non-finite values")
    _, r = np.linalg.qr(rows.T, mode="reduced")
    return np.ascontiguousarray(r.T)
