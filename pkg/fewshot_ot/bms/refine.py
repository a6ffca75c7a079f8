"""Logistic-regression refinement of the class weights.

The refinement minimizes the soft-target cross-entropy

    L(W, kappa) = -(1/N) sum_ij P[i, j] log softmax(S)[i, j]
    S[i, j]     = kappa * <w_j, f_i> / ||w_j||

by full-batch gradient descent with classical momentum. W steps along the
gradient with respect to the cosine scores A = S / kappa, that is the W
gradient divided by kappa; kappa steps along its own gradient. The columns
of W are projected back to the unit sphere at the end of every epoch.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.special import log_softmax, softmax

logger = logging.getLogger(__name__)

KAPPA_FLOOR = 1e-3


class RefinementError(RuntimeError):
    """Raised when the refinement loss becomes non-finite."""


def _cosines(features: np.ndarray, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    norms = np.linalg.norm(W, axis=0)
    V = W / norms
    return features @ V, V, norms


def logistic_loss(features: np.ndarray, W: np.ndarray, kappa: float, P: np.ndarray) -> float:
    """
    Soft-target cross-entropy of the cosine classifier.

    Args:
        features: N x d matrix
        W: d x n weight matrix (any nonzero column norms)
        kappa: Logit temperature
        P: N x n soft targets

    Returns:
        Mean loss over the N samples
    """
    A, _, _ = _cosines(np.asarray(features, dtype=np.float64), np.asarray(W, dtype=np.float64))
    return float(-(P * log_softmax(kappa * A, axis=1)).sum() / A.shape[0])


def logistic_gradients(
    features: np.ndarray, W: np.ndarray, kappa: float, P: np.ndarray
) -> Tuple[float, np.ndarray, float]:
    """
    Loss value and analytic gradients with respect to W and kappa.

    Returns:
        (loss, dL/dW as a d x n matrix, dL/dkappa)
    """
    features = np.asarray(features, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    N = features.shape[0]

    A, V, norms = _cosines(features, W)
    S = kappa * A
    loss = float(-(P * log_softmax(S, axis=1)).sum() / N)

    # dL/dS
    G = (softmax(S, axis=1) * P.sum(axis=1, keepdims=True) - P) / N

    grad_kappa = float((G * A).sum())
    grad_W = kappa * (features.T @ G - V * (G * A).sum(axis=0)) / norms
    return loss, grad_W, grad_kappa


def logistic_refine(
    W: np.ndarray,
    kappa: float,
    features: np.ndarray,
    P: np.ndarray,
    epochs: int,
    lr: float = 0.1,
    momentum: float = 0.8,
) -> Tuple[np.ndarray, float]:
    """
    Refine (W, kappa) on the soft allocation P.

    Args:
        W: d x n weight matrix with unit-norm columns
        kappa: Positive logit temperature
        features: N x d matrix (support rows then query rows)
        P: Row-stochastic N x n soft targets
        epochs: Number of full-batch epochs; 0 returns the inputs unchanged
        lr: Gradient step; W uses lr / kappa
        momentum: Momentum coefficient in [0, 1)

    Returns:
        (refined W with unit-norm columns, refined kappa)

    Raises:
        ValueError: On invalid hyperparameters
        RefinementError: If the loss becomes non-finite
    """
    if epochs < 0:
        raise ValueError(f"epochs must be nonnegative, got {epochs}")
    if epochs == 0:
        return W, kappa
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not 0 <= momentum < 1:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")

    W = np.array(W, dtype=np.float64)
    kappa = float(kappa)
    velocity_W = np.zeros_like(W)
    velocity_kappa = 0.0

    for epoch in range(epochs):
        loss, grad_W, grad_kappa = logistic_gradients(features, W, kappa, P)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad_W)):
            logger.warning(f"Refinement diverged at epoch {epoch} (lr={lr}, kappa={kappa:.4g})")
            raise RefinementError(f"non-finite refinement loss at epoch {epoch}; lower the learning rate")

        # W steps on the cosine scale
        velocity_W = momentum * velocity_W - (lr / kappa) * grad_W
        velocity_kappa = momentum * velocity_kappa - lr * grad_kappa
        W += velocity_W
        kappa += velocity_kappa

        if kappa <= 0:
            logger.warning(f"kappa stepped to {kappa:.4g}; projected to {KAPPA_FLOOR}")
            kappa = KAPPA_FLOOR
            velocity_kappa = 0.0

        norms = np.linalg.norm(W, axis=0)
        if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
            raise RefinementError(f"weight column collapsed at epoch {epoch}")
        W /= norms

    return W, kappa
