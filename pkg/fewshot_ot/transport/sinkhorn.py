"""Entropic optimal-transport allocation with a per-class minimum size.

The allocation P of samples (rows) to classes (columns) starts from a
row-wise softmax of -lambda * C. Each iteration rescales every row to its
target mass, then rescales only the columns whose mass fell below their
target. Columns holding more than their target are left untouched, so every
class receives at least q[j] mass without being forced to exactly q[j]. The
rounds stop early once no column falls short of its floor.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-6


class SinkhornError(RuntimeError):
    """Raised when the scaling iterations produce non-finite values."""


@dataclass(frozen=True, eq=False)
class Marginals:
    """Row and column targets of the allocation.

    Attributes:
        p: Row targets, length l + u (all ones for per-sample unit mass)
        q: Column floors, length n (k * 1_n, or exact class sizes)
    """

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        q = np.asarray(self.q, dtype=np.float64)
        if p.ndim != 1 or q.ndim != 1:
            raise ValueError("marginals must be vectors")
        if np.any(p <= 0) or np.any(q <= 0):
            raise ValueError("marginal entries must be positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def min_size(cls, num_samples: int, n_way: int, k: float) -> "Marginals":
        """Unit row mass and a common column floor k."""
        return cls(np.ones(num_samples), np.full(n_way, float(k)))

    @classmethod
    def exact(cls, num_samples: int, targets) -> "Marginals":
        """Unit row mass and exact per-class sizes."""
        return cls(np.ones(num_samples), np.asarray(targets, dtype=np.float64))


def cost_matrix(features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Cosine cost between samples and class weights.

    ``C[i, j] = 1 - <w_j, f_i>`` with unit-norm rows f_i and unit-norm
    weight columns w_j, hence C in [0, 2].

    Args:
        features: N x d matrix of unit-norm rows
        weights: d x n matrix of unit-norm columns

    Returns:
        N x n cost matrix

    Raises:
        ValueError: If a row or column is not unit-norm
    """
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if np.max(np.abs(np.linalg.norm(features, axis=1) - 1.0)) > NORM_TOLERANCE:
        raise ValueError("cost_matrix expects unit-norm feature rows")
    if np.max(np.abs(np.linalg.norm(weights, axis=0) - 1.0)) > NORM_TOLERANCE:
        raise ValueError("cost_matrix expects unit-norm weight columns")
    return np.clip(1.0 - features @ weights, 0.0, 2.0)


def min_size_sinkhorn(
    C: np.ndarray,
    marginals: Marginals,
    lam: float = 8.5,
    iters: int = 50,
    tol: float = 1e-6,
) -> np.ndarray:
    """
    Min-size Sinkhorn allocation.

    The allocation is kept in the scaling form ``diag(a) K diag(b)`` with
    ``K = exp(-lambda * C)`` (row-max shifted): a row round recomputes ``a``
    and a column round multiplies the deficient entries of ``b``.

    Args:
        C: N x n cost matrix
        marginals: Row targets p and column floors q
        lam: Inverse entropic regularization strength (lambda)
        iters: Maximum number of row/column scaling rounds
        tol: Relative shortfall below which a column counts as satisfied;
            the rounds stop once every column is satisfied

    Returns:
        Strictly positive N x n allocation matrix

    Raises:
        ValueError: On invalid arguments
        SinkhornError: If an intermediate value is non-finite
    """
    C = np.asarray(C, dtype=np.float64)
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if iters < 1:
        raise ValueError(f"iters must be at least 1, got {iters}")
    if tol < 0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    if C.shape != (marginals.p.shape[0], marginals.q.shape[0]):
        raise ValueError(
            f"cost shape {C.shape} does not match marginals "
            f"({marginals.p.shape[0]}, {marginals.q.shape[0]})"
        )

    # Row-max shifted kernel; the first row round turns it into the row softmax
    logits = -lam * C
    K = np.exp(logits - logits.max(axis=1, keepdims=True))

    p, q = marginals.p, marginals.q
    b = np.ones(q.shape[0])
    stop = 1.0 + tol
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(iters):
            a = p / (K @ b)
            scale = q / ((a @ K) * b)
            if scale.max() <= stop:
                break
            b *= np.maximum(scale, 1.0)
        P = a[:, None] * K * b

    if not np.all(np.isfinite(P)) or np.any(P <= 0):
        logger.warning(f"Min-size Sinkhorn diverged (lambda={lam}, cost range "
                       f"[{C.min():.3g}, {C.max():.3g}])")
        raise SinkhornError(
            f"non-finite or vanishing allocation; lambda={lam} is too large for the cost scale"
        )
    return P


def row_normalize_final(P: np.ndarray, p: np.ndarray) -> np.ndarray:
    """
    Rescale every row of P to its target mass.

    Args:
        P: Strictly positive allocation matrix
        p: Row targets

    Returns:
        New matrix whose rows sum to p
    """
    P = np.asarray(P, dtype=np.float64)
    return P * (np.asarray(p, dtype=np.float64) / P.sum(axis=1))[:, None]
