"""Transductive K-Means baseline seeded with the support means."""

import logging

import numpy as np

from fewshot_ot.bms.weights import init_weights
from fewshot_ot.preprocess.transforms import ProcessedEpisode

logger = logging.getLogger(__name__)


def kmeans_classify(processed: ProcessedEpisode, outer_iters: int = 20) -> np.ndarray:
    """
    Cosine K-Means over the query set with the support rows held fixed.

    Prototypes start at the normalized support means. Each round assigns
    every query to its most similar prototype, then re-estimates each
    prototype from its support rows plus its assigned queries. The loop
    stops early once the assignment no longer changes.

    Args:
        processed: Preprocessed episode
        outer_iters: Maximum number of assignment rounds

    Returns:
        Length-u labels
    """
    n_way = processed.n_way
    query = np.asarray(processed.query, dtype=np.float64)
    support = np.asarray(processed.support, dtype=np.float64)
    W = init_weights(support, processed.support_labels, n_way)
    labels = np.argmax(query @ W, axis=1)

    for round_index in range(outer_iters):
        sums = np.zeros((n_way, query.shape[1]))
        np.add.at(sums, processed.support_labels, support)
        np.add.at(sums, labels, query)
        W = (sums / np.linalg.norm(sums, axis=1, keepdims=True)).T

        updated = np.argmax(query @ W, axis=1)
        if np.array_equal(updated, labels):
            logger.debug(f"K-Means converged after {round_index + 1} rounds")
            break
        labels = updated

    return labels
