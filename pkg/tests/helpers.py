"""Shared fixtures for the test suite."""

import numpy as np

from fewshot_ot.features.episodes import EpisodeSpec, sample_episode
from fewshot_ot.features.store import store_from_arrays
from fewshot_ot.features.synthetic import generate_synthetic_store
from fewshot_ot.preprocess.transforms import CenterMode, PreprocessConfig, peme


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Random unit-norm rows."""
    rows = rng.standard_normal((n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def indexed_store(num_classes: int = 6, per_class: int = 12, dim: int = 3):
    """Store whose vectors are all distinct: row r of class c is (c, r, 1, 1, ...)."""
    vectors = {}
    for c in range(num_classes):
        rows = np.ones((per_class, dim))
        rows[:, 0] = c
        rows[:, 1] = np.arange(per_class)
        vectors[c] = rows
    return store_from_arrays(vectors, "indexed")


def separated_store(seed: int = 3, separation: float = 20.0, dim: int = 32, per_class: int = 40):
    """Gaussian store whose classes cannot be confused."""
    return generate_synthetic_store(10, dim, per_class, separation, "gaussian", seed=seed)


def processed_episode(store, n_way=5, shots=1, queries=15, seed=11, center=CenterMode.NOVEL_MEAN,
                      apply_qr=True, query_counts=None):
    """Sample and preprocess one episode."""
    spec = EpisodeSpec(n_way, shots, queries, seed=seed, query_counts=query_counts)
    episode = sample_episode(store, spec)
    return peme(episode, PreprocessConfig(center_mode=center, apply_qr=apply_qr))
