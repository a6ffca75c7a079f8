"""Boosted Min-size Sinkhorn: the transductive EM loop.

Each outer iteration computes the cosine cost of every sample to every class
weight, allocates samples to classes with the min-size Sinkhorn (E-step),
moves the weights to the allocation-weighted means and refines them with a
few epochs of logistic regression (M-step), then re-estimates the class size
floor from the current predictions.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from fewshot_ot.bms.refine import logistic_refine
from fewshot_ot.bms.weights import init_weights, prototype_update
from fewshot_ot.preprocess.transforms import ProcessedEpisode
from fewshot_ot.transport.sinkhorn import (
    Marginals,
    cost_matrix,
    min_size_sinkhorn,
    row_normalize_final,
)

logger = logging.getLogger(__name__)


class BmsMode(Enum):
    """Column targets used by the E-step."""

    BMS = "bms"
    BMS_STAR = "bms_star"

    @classmethod
    def from_string(cls, value: str) -> "BmsMode":
        """
        Convert a string to a BmsMode ('bms', 'bms_star').

        Raises:
            ValueError: If value is not a known mode
        """
        normalized = value.lower().replace("*", "_star").replace("-", "_")
        try:
            return cls(normalized)
        except ValueError:
            valid = [m.value for m in cls]
            raise ValueError(f"Invalid BMS mode: {value}. Valid modes are: {', '.join(valid)}")


# Epochs (1-shot, multi-shot) when none are configured
_EPOCH_SCHEDULE = {
    BmsMode.BMS: (0, 40),
    BmsMode.BMS_STAR: (20, 40),
}


@dataclass(frozen=True)
class BmsConfig:
    """Hyperparameters of the EM loop.

    Attributes:
        lam: Sinkhorn regularization strength lambda
        outer_iters: Number of EM iterations
        epochs: Refinement epochs per iteration; None selects them from the shot count
        lr: Refinement gradient step
        momentum: Refinement momentum
        kappa_init: Initial logit temperature
        mode: bms (estimated floor k) or bms_star (exact class sizes)
        exact_targets: Per-class sample counts (support plus query), bms_star only
        sinkhorn_iters: Scaling rounds per E-step
        clamp_support: Pin support rows of P to their known class
        persist_kappa: Carry kappa across outer iterations instead of resetting it
    """

    lam: float = 8.5
    outer_iters: int = 20
    epochs: Optional[int] = None
    lr: float = 0.1
    momentum: float = 0.8
    kappa_init: float = 10.0
    mode: BmsMode = BmsMode.BMS
    exact_targets: Optional[Tuple[int, ...]] = None
    sinkhorn_iters: int = 50
    clamp_support: bool = False
    persist_kappa: bool = True

    def __post_init__(self) -> None:
        if not isinstance(self.mode, BmsMode):
            object.__setattr__(self, "mode", BmsMode.from_string(self.mode))
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.outer_iters < 0:
            raise ValueError(f"outer_iters must be nonnegative, got {self.outer_iters}")
        if self.epochs is not None and self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.kappa_init <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa_init}")
        if self.sinkhorn_iters < 1:
            raise ValueError(f"sinkhorn_iters must be at least 1, got {self.sinkhorn_iters}")
        if self.exact_targets is not None:
            targets = tuple(int(t) for t in self.exact_targets)
            if min(targets) < 1:
                raise ValueError("exact targets must be positive")
            object.__setattr__(self, "exact_targets", targets)

    def resolve_epochs(self, shots: int) -> int:
        """Configured epochs, or the default for this mode and shot count."""
        if self.epochs is not None:
            return self.epochs
        one_shot, multi_shot = _EPOCH_SCHEDULE[self.mode]
        return one_shot if shots == 1 else multi_shot

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "outer_iters": self.outer_iters,
            "epochs": self.epochs,
            "lr": self.lr,
            "momentum": self.momentum,
            "kappa": self.kappa_init,
            "mode": self.mode.value,
            "exact_targets": list(self.exact_targets) if self.exact_targets else None,
            "sinkhorn_iters": self.sinkhorn_iters,
            "clamp_support": self.clamp_support,
            "persist_kappa": self.persist_kappa,
        }


@dataclass(eq=False)
class BmsState:
    """Mutable state of one episode's EM loop.

    Attributes:
        W: d x n weight matrix with unit-norm columns
        P: N x n allocation matrix (None before the first E-step)
        k: Current class size floor
        kappa: Current logit temperature
        labels: Current predictions for all N rows
        k_history: Floor after every iteration
    """

    W: np.ndarray
    k: int
    kappa: float
    P: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    k_history: List[int] = field(default_factory=list)


def predict(P: np.ndarray) -> np.ndarray:
    """Row-wise argmax of P; ties go to the lowest class index."""
    return np.argmax(np.asarray(P), axis=1)


def estimate_min_size(labels: np.ndarray, n_way: int) -> int:
    """
    Smallest predicted class count.

    A class that is never predicted would give a zero floor; it is clamped
    to 1 with a warning.

    Args:
        labels: Predicted labels in [0, n_way)
        n_way: Number of classes

    Returns:
        Floor k >= 1
    """
    k = int(np.bincount(np.asarray(labels), minlength=n_way).min())
    if k == 0:
        logger.warning("A class received no predictions; min-size floor clamped to 1")
        return 1
    return k


def _clamp_support(P: np.ndarray, support_labels: np.ndarray) -> np.ndarray:
    P = P.copy()
    n_support = support_labels.shape[0]
    P[:n_support] = 0.0
    P[np.arange(n_support), support_labels] = 1.0
    return P


def solve(episode: ProcessedEpisode, cfg: BmsConfig) -> BmsState:
    """
    Run the EM loop on a preprocessed episode.

    Args:
        episode: Episode with unit-norm rows
        cfg: Hyperparameters

    Returns:
        Final BmsState; ``labels`` covers support then query rows

    Raises:
        ValueError: If bms_star targets are missing or inconsistent
        SinkhornError, RefinementError, DegenerateWeightsError: Propagated
    """
    features = episode.stacked()
    N, n_way = features.shape[0], episode.n_way
    epochs = cfg.resolve_epochs(episode.shots)

    if cfg.mode is BmsMode.BMS_STAR:
        if cfg.exact_targets is None:
            raise ValueError("bms_star needs exact per-class targets")
        if len(cfg.exact_targets) != n_way or sum(cfg.exact_targets) != N:
            raise ValueError(
                f"exact targets {list(cfg.exact_targets)} do not match "
                f"{n_way} classes and {N} samples"
            )

    state = BmsState(
        W=init_weights(episode.support, episode.support_labels, n_way),
        k=episode.shots,
        kappa=cfg.kappa_init,
    )

    if cfg.outer_iters == 0:
        state.labels = np.argmin(cost_matrix(features, state.W), axis=1)
        return state

    if cfg.mode is BmsMode.BMS_STAR:
        marginals = Marginals.exact(N, cfg.exact_targets)
    else:
        marginals = Marginals.min_size(N, n_way, state.k)

    for _ in range(cfg.outer_iters):
        C = cost_matrix(features, state.W)
        P = min_size_sinkhorn(C, marginals, cfg.lam, cfg.sinkhorn_iters)
        P = row_normalize_final(P, marginals.p)
        if cfg.clamp_support:
            P = _clamp_support(P, episode.support_labels)

        kappa = state.kappa if cfg.persist_kappa else cfg.kappa_init
        W = prototype_update(features, P)
        state.W, state.kappa = logistic_refine(W, kappa, features, P, epochs, cfg.lr, cfg.momentum)
        state.P = P
        state.labels = predict(P)

        if cfg.mode is BmsMode.BMS:
            k = estimate_min_size(state.labels, n_way)
            if k != state.k:
                state.k = k
                marginals = Marginals.min_size(N, n_way, k)
        state.k_history.append(state.k)

    return state


def run_bms(episode: ProcessedEpisode, cfg: BmsConfig) -> np.ndarray:
    """
    Predict the query labels of an episode.

    Returns:
        Length-u array of predicted labels
    """
    state = solve(episode, cfg)
    return state.labels[episode.support.shape[0]:]
