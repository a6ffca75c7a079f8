"""Class weight (prototype) initialization and P-weighted updates."""

import numpy as np

ZERO_NORM = 1e-12


class DegenerateWeightsError(ValueError):
    """Raised when a class prototype has zero norm or zero mass."""


def _normalize_columns(U: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(U, axis=0)
    bad = np.flatnonzero(norms <= ZERO_NORM)
    if bad.size:
        raise DegenerateWeightsError(f"{what} of class {int(bad[0])} has zero norm")
    return U / norms


def init_weights(support: np.ndarray, support_labels: np.ndarray, n_way: int) -> np.ndarray:
    """
    Initial weight matrix from the support set.

    Column j is the L2-normalized mean of the class-j support rows.

    Args:
        support: l x d matrix of unit-norm rows
        support_labels: length-l labels in [0, n_way)
        n_way: Number of classes

    Returns:
        d x n_way matrix with unit-norm columns

    Raises:
        DegenerateWeightsError: If a class has no support row or a zero mean
    """
    support = np.asarray(support, dtype=np.float64)
    labels = np.asarray(support_labels)
    counts = np.bincount(labels, minlength=n_way)
    if counts.shape[0] != n_way or np.any(counts == 0):
        raise DegenerateWeightsError("every class needs at least one support row")

    onehot = np.zeros((labels.shape[0], n_way))
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    means = support.T @ onehot / counts
    return _normalize_columns(means, "support mean")


def prototype_update(features: np.ndarray, P: np.ndarray) -> np.ndarray:
    """
    Move every prototype to the P-weighted mean of all samples.

    ``u_j = sum_i P[i, j] f_i / sum_i P[i, j]`` and ``w_j = u_j / ||u_j||``.

    Args:
        features: N x d matrix (support rows then query rows)
        P: N x n allocation matrix

    Returns:
        d x n matrix with unit-norm columns

    Raises:
        DegenerateWeightsError: On a zero column sum or a zero-norm mean
    """
    features = np.asarray(features, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    mass = P.sum(axis=0)
    empty = np.flatnonzero(mass <= 0)
    if empty.size:
        raise DegenerateWeightsError(f"class {int(empty[0])} received no allocation mass")
    return _normalize_columns(features.T @ P / mass, "weighted mean")
