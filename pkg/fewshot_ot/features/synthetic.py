"""Synthetic feature stores standing in for extracted backbone features."""

import logging
import math
from enum import Enum
from typing import Tuple, Union

import numpy as np

from fewshot_ot.features.store import ClassBlock, FeatureStore

logger = logging.getLogger(__name__)

# Smallest center coordinate in gaussian mode; clipping at 0 is then a >5 sigma event
GAUSSIAN_FLOOR = 5.0


class SkewMode(Enum):
    """Marginal shape of generated features."""

    GAUSSIAN = "gaussian"
    RELU_SKEWED = "relu_skewed"

    @classmethod
    def from_string(cls, value: str) -> "SkewMode":
        """
        Convert a string to a SkewMode; 'relu' is accepted for relu_skewed.

        Raises:
            ValueError: If value is not a known mode
        """
        aliases = {"relu": "relu_skewed", "skewed": "relu_skewed"}
        try:
            return cls(aliases.get(value.lower(), value.lower()))
        except ValueError:
            valid = [m.value for m in cls]
            raise ValueError(f"Invalid skew mode: {value}. Valid modes are: {', '.join(valid)}")


def simplex_centers(
    rng: np.random.Generator, num_classes: int, dim: int, separation: float
) -> np.ndarray:
    """
    Class centers at pairwise distance ``separation``.

    The vertices of a regular simplex are rotated into ``dim`` dimensions by
    a random orthonormal frame. With more classes than dimensions the centers
    are random Gaussian directions scaled to the same expected distance.

    Returns:
        num_classes x dim matrix
    """
    if num_classes <= dim:
        vertices = np.eye(num_classes) - 1.0 / num_classes
        frame, _ = np.linalg.qr(rng.standard_normal((dim, num_classes)))
        centers = vertices @ frame.T
    else:
        centers = rng.standard_normal((num_classes, dim)) / math.sqrt(dim)
    # Simplex vertices of the unit basis sit sqrt(2) apart
    return centers * (separation / math.sqrt(2.0))


def generate_synthetic_store(
    num_classes: int,
    dim: int,
    per_class: int,
    separation: float,
    skew_mode: Union[str, SkewMode] = SkewMode.RELU_SKEWED,
    seed: int = 0,
    offset_range: Tuple[float, float] = (0.0, 0.0),
) -> FeatureStore:
    """
    Generate a nonnegative feature store with controllable class overlap.

    ``gaussian``: N(mu_c, I) around shifted centers, clipped at 0.
    ``relu_skewed``: (g + mu_{c,k})^2 with g ~ N(0, 1) and
    mu_{c,k} = center_{c,k} + o_k, o_k ~ U[offset_range] per dimension.
    The default range (0, 0) keeps the centers as drawn, giving heavily
    right-skewed marginals; positive offsets move each dimension away from
    zero so that the square root of a feature is close to Gaussian.

    Args:
        num_classes: Number of classes
        dim: Feature dimension
        per_class: Vectors per class
        separation: Pairwise distance between class centers
        skew_mode: Marginal shape
        seed: Generator seed
        offset_range: Per-dimension base offset bounds for relu_skewed (opt-in)

    Returns:
        FeatureStore with class ids 0..num_classes-1, float32-representable values
    """
    if num_classes < 1 or dim < 1 or per_class < 1:
        raise ValueError(
            f"counts must be positive (classes={num_classes}, dim={dim}, per_class={per_class})"
        )
    if separation < 0:
        raise ValueError(f"separation must be nonnegative, got {separation}")
    low, high = offset_range
    if low < 0 or high < low:
        raise ValueError(f"invalid offset range {offset_range}")

    mode = skew_mode if isinstance(skew_mode, SkewMode) else SkewMode.from_string(skew_mode)
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = simplex_centers(rng, num_classes, dim, separation)

    if mode is SkewMode.GAUSSIAN:
        means = centers + (GAUSSIAN_FLOOR - centers.min())
    else:
        means = centers + rng.uniform(low, high, size=dim)

    blocks = []
    for class_id in range(num_classes):
        noise = rng.standard_normal((per_class, dim))
        if mode is SkewMode.GAUSSIAN:
            vectors = np.maximum(means[class_id] + noise, 0.0)
        else:
            vectors = (noise + means[class_id]) ** 2
        blocks.append(ClassBlock(class_id, vectors.astype(np.float32)))

    logger.debug(
        f"Generated {mode.value} store: {num_classes} classes x {per_class} x {dim}, "
        f"separation {separation}"
    )
    tag = f"synthetic:{mode.value}:sep={separation}:seed={seed}"
    return FeatureStore(dim, tuple(blocks), tag)
