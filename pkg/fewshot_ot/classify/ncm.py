"""Inductive nearest-class-mean classifier."""

import numpy as np

from fewshot_ot.preprocess.transforms import ProcessedEpisode


def class_means(support: np.ndarray, support_labels: np.ndarray, n_way: int) -> np.ndarray:
    """Unnormalized mean of the support rows of each class (n_way x d)."""
    support = np.asarray(support, dtype=np.float64)
    counts = np.bincount(support_labels, minlength=n_way)
    sums = np.zeros((n_way, support.shape[1]))
    np.add.at(sums, support_labels, support)
    return sums / counts[:, None]


def ncm_classify(processed: ProcessedEpisode) -> np.ndarray:
    """
    Assign every query to the class with the closest support centroid.

    Args:
        processed: Preprocessed episode

    Returns:
        Length-u labels; ties go to the lowest class index
    """
    centroids = class_means(processed.support, processed.support_labels, processed.n_way)
    query = np.asarray(processed.query, dtype=np.float64)
    distances = (
        (query ** 2).sum(axis=1)[:, None]
        - 2.0 * query @ centroids.T
        + (centroids ** 2).sum(axis=1)[None, :]
    )
    return np.argmin(distances, axis=1)
